use super::{IsingModel, ModelError};
use crate::markov::{correlation, stationary_distribution, Distribution, Generator, Observable};
use crate::numerics::integrate_adaptive;
use crate::perturbation::AmplitudeSchedule;
use crate::response::{response_fd_oracle, FdEstimate, ResponseError};

/// `max_σ |LV(σ) - Σ_i J_i(σ)|` for the magnetization `V`.
pub fn flux_identity_check(model: &IsingModel) -> Result<f64, ModelError> {
    let lv = model.generator.apply_L(model.magnetization())?;
    let m = model.spec.graph.vertices();
    let mut worst: f64 = 0.0;
    for c in 0..model.generator.n() {
        let flux: f64 = (0..m).map(|i| model.observables[&format!("J_{i}")][c]).sum();
        worst = worst.max((lv[c] - flux).abs());
    }
    Ok(worst)
}

/// Response of the magnetization to a constant perturbation switched on at
/// time 0 from the stationary law, by the finite-difference oracle (`lhs`)
/// and by the two correlation terms of the stationary response formula.
#[derive(Debug, Clone, PartialEq)]
pub struct RediResult {
    /// `global` or `site:i`.
    pub variant: String,
    pub lhs: f64,
    /// `a [⟨V(t) Q(t)⟩ - ⟨V(0) Q(t)⟩]_ρ`
    pub rhs_a: f64,
    /// `-b ∫_0^t ⟨(LV)(x_0) Q(x_s)⟩_ρ ds`
    pub rhs_b: f64,
    pub fd: FdEstimate,
}

impl RediResult {
    pub fn rhs(&self) -> f64 {
        self.rhs_a + self.rhs_b
    }

    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs()).abs() / self.rhs().abs().max(f64::MIN_POSITIVE)
    }
}

#[allow(clippy::too_many_arguments)]
fn redi_core(
    generator: &Generator,
    rho: &Distribution,
    v: &Observable,
    q: &Observable,
    a: f64,
    b: f64,
    h: f64,
    t: f64,
    variant: String,
) -> Result<RediResult, ModelError> {
    let fd = response_fd_oracle(generator, rho, v, q, a, b, &AmplitudeSchedule::constant(1.0), t, h)?;
    let rhs_a = a * (correlation(generator, rho, v, q, t, t)? - correlation(generator, rho, v, q, 0.0, t)?);
    let lv = generator.apply_L(v)?;
    let mut failure = None;
    let integral = integrate_adaptive(
        |s| match correlation(generator, rho, &lv, q, 0.0, s) {
            Ok(c) => c,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &[0.0, t],
        1e-12,
        500,
    );
    if let Some(e) = failure {
        return Err(e.into());
    }
    let integral = integral.map_err(ResponseError::from)?.value;
    Ok(RediResult {
        variant,
        lhs: fd.value,
        rhs_a,
        rhs_b: -b * integral,
        fd,
    })
}

/// Global amplitude on the magnetization, response of the magnetization.
/// `LV = Σ_i J_i` because exchanges leave `V` unchanged.
pub fn redi_experiment(model: &IsingModel, a: f64, b: f64, h: f64, t: f64) -> Result<RediResult, ModelError> {
    let rho = stationary_distribution(&model.generator)?;
    let v = model.magnetization();
    redi_core(&model.generator, &rho, v, v, a, b, h, t, "global".into())
}

/// Amplitude on the single spin `σ(site)`, response of the magnetization.
/// Here `Lσ(site)` picks up exchange terms besides the flux `J_site`, and
/// the generator's own action is used.
pub fn redi_site_resolved(
    model: &IsingModel,
    site: usize,
    a: f64,
    b: f64,
    h: f64,
    t: f64,
) -> Result<RediResult, ModelError> {
    let rho = stationary_distribution(&model.generator)?;
    let v = model.observable(&format!("sigma_{site}"))?;
    redi_core(&model.generator, &rho, v, model.magnetization(), a, b, h, t, format!("site:{site}"))
}
