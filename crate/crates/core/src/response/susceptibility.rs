use super::{ensure_stationary, ResponseError};
use crate::markov::{check_len, stationary_distribution, Distribution, Generator, Observable};
use crate::numerics::compensated_sum;
use crate::perturbation::perturbed_generator_constant;

/// `χ_MV` for the `(a, b)` perturbation by `V` measured on `LM`, and `χ_VM`
/// for the `(b, a)` perturbation by `M` measured on `LV`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SusceptibilityPair {
    pub chi_mv: f64,
    pub chi_vm: f64,
    pub a: f64,
    pub b: f64,
}

impl SusceptibilityPair {
    pub fn asymmetry(&self) -> f64 {
        (self.chi_mv - self.chi_vm).abs()
    }
}

fn weighted(rho: &Distribution, f: &Observable, g: &Observable) -> f64 {
    compensated_sum((0..rho.len()).map(|x| rho[x] * f[x] * g[x]))
}

/// `χ(V → M; a, b) = b⟨M LV⟩_ρ + a⟨V LM⟩_ρ`.
fn chi(rho: &Distribution, v: &Observable, lv: &Observable, m: &Observable, lm: &Observable, a: f64, b: f64) -> f64 {
    b * weighted(rho, m, lv) + a * weighted(rho, v, lm)
}

/// Closed-form stationary susceptibilities. The two entries are computed
/// independently; they agree identically.
pub fn chi_formula(
    generator: &Generator,
    rho: &Distribution,
    v: &Observable,
    m: &Observable,
    a: f64,
    b: f64,
) -> Result<SusceptibilityPair, ResponseError> {
    check_len(generator.n(), v.len())?;
    check_len(generator.n(), m.len())?;
    ensure_stationary(generator, rho)?;
    let lv = generator.apply_L(v)?;
    let lm = generator.apply_L(m)?;
    Ok(SusceptibilityPair {
        chi_mv: chi(rho, v, &lv, m, &lm, a, b),
        chi_vm: chi(rho, m, &lm, v, &lv, b, a),
        a,
        b,
    })
}

/// Forward-difference susceptibilities from stationary laws of the
/// constant-amplitude perturbed generators.
pub fn chi_fd(
    generator: &Generator,
    v: &Observable,
    m: &Observable,
    a: f64,
    b: f64,
    h_scale: f64,
) -> Result<SusceptibilityPair, ResponseError> {
    check_len(generator.n(), v.len())?;
    check_len(generator.n(), m.len())?;
    if !(h_scale.is_finite() && h_scale != 0.0) {
        return Err(ResponseError::InvalidTimes(format!("h_scale {h_scale} must be nonzero")));
    }
    let rho = stationary_distribution(generator)?;
    let lv = generator.apply_L(v)?;
    let lm = generator.apply_L(m)?;
    let shift = |potential: &Observable, a: f64, b: f64, target: &Observable| -> Result<f64, ResponseError> {
        let perturbed = perturbed_generator_constant(generator, potential, a, b, h_scale)?;
        let rho_h = stationary_distribution(&perturbed)?;
        let delta = compensated_sum((0..rho.len()).map(|x| (rho_h[x] - rho[x]) * target[x]));
        Ok(delta / h_scale)
    };
    Ok(SusceptibilityPair {
        chi_mv: shift(v, a, b, &lm)?,
        chi_vm: shift(m, b, a, &lv)?,
        a,
        b,
    })
}

/// `max_x |[(L^V_{ab} - L)M - (L^M_{ba} - L)V - h(b - a)L(MV)](x)|`, which is
/// `O(h²)`.
pub fn generator_identity_check(
    generator: &Generator,
    v: &Observable,
    m: &Observable,
    a: f64,
    b: f64,
    h: f64,
) -> Result<f64, ResponseError> {
    check_len(generator.n(), v.len())?;
    check_len(generator.n(), m.len())?;
    let mv = v.product(m)?;
    let mut worst: f64 = 0.0;
    for x in 0..generator.n() {
        let mut acc = crate::numerics::CompensatedSum::new();
        for (y, w) in generator.row(x) {
            // (e^{hc} - 1) through exp_m1 keeps the O(h²) residual resolvable
            let dv = (h * (b * v[y] - a * v[x])).exp_m1();
            let dm = (h * (a * m[y] - b * m[x])).exp_m1();
            acc.add(w * dv * (m[y] - m[x]));
            acc.add(-w * dm * (v[y] - v[x]));
            acc.add(-h * (b - a) * w * (mv[y] - mv[x]));
        }
        worst = worst.max(acc.value().abs());
    }
    Ok(worst)
}
