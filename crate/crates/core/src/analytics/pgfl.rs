//! Probability generating functional of the interferer field: real moments
//! and complex (characteristic-function) orders of the conditional success
//! probability.

use num_complex::Complex64;

use super::quadrature::{integrate, Tolerance};
use super::{ComplexEstimate, Estimate, QuadratureSpec, Scenario};
use crate::{Error, Protocol, Result};

const MAX_DOUBLINGS: usize = 64;
const MAX_SERIES_TERMS: usize = 2_000_000;

/// `exp(w) - 1` without cancellation for small `w`.
pub(crate) fn expm1(w: Complex64) -> Complex64 {
    let (a, b) = (w.re, w.im);
    let half_sin = (0.5 * b).sin();
    Complex64::new(a.exp_m1() * b.cos() - 2.0 * half_sin * half_sin, a.exp() * b.sin())
}

/// `1 - exp(order * ln_base)`.
fn one_minus_pow(ln_base: f64, order: Complex64) -> Complex64 {
    -expm1(order * ln_base)
}

fn geometric_breaks(lo: f64, hi: f64) -> Vec<f64> {
    let mut breaks = Vec::new();
    let mut z = lo * 2.0;
    while z < hi {
        breaks.push(z);
        z *= 2.0;
    }
    breaks
}

struct Radial<'a> {
    scenario: &'a Scenario,
    tol: Tolerance,
}

impl Radial<'_> {
    fn alpha(&self) -> f64 {
        self.scenario.channel.pathloss_exp
    }

    fn gamma(&self) -> f64 {
        self.scenario.channel.sinr_threshold
    }

    /// `ln x(z)` with `x(z) = 1 / (1 + gamma (r0/z)^alpha)`.
    fn ln_x(&self, z: f64) -> f64 {
        -(self.gamma() * (self.scenario.r0 / z).powf(self.alpha())).ln_1p()
    }

    /// `ln(q x(z) + 1 - q)`.
    fn ln_b(&self, q: f64, z: f64) -> f64 {
        let y = 1.0 / (1.0 + (z / self.scenario.r0).powf(self.alpha()) / self.gamma());
        (-q * y).ln_1p()
    }

    /// Scale `a` with `z^2 = a^2 (t / (1 - t))^delta` for `t = x(z)`.
    fn scale(&self) -> f64 {
        self.scenario.r0 * self.gamma().powf(1.0 / self.alpha())
    }

    fn z_of_t(&self, t: f64) -> f64 {
        self.scale() * (t / (1.0 - t)).powf(1.0 / self.alpha())
    }

    /// Split point in `x` below which the series is used. For oscillatory
    /// orders it keeps the phase variation over the quadrature part bounded.
    fn split(&self, order: Complex64, outer: f64) -> f64 {
        let s = order.im.abs();
        let width = if s > 0.0 { (16.0 * std::f64::consts::PI / s).clamp(1e-3, std::f64::consts::LN_2) } else { std::f64::consts::LN_2 };
        (-width).exp().min((self.ln_x(outer)).exp())
    }

    /// `sum_k C(delta + k, k) t0^(o + delta + k) / (o + delta + k)`, which
    /// times `a^2 delta / 2` is `int_0^{z(t0)} x(z)^o z dz`.
    fn near_series(&self, order: Complex64, t0: f64) -> Result<Complex64> {
        let delta = 2.0 / self.alpha();
        let ln_t0 = t0.ln();
        let mut power = ((order + delta) * ln_t0).exp();
        let mut magnitude = ((order.re + delta) * ln_t0).exp();
        let mut coeff = 1.0;
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 0..MAX_SERIES_TERMS {
            let denom = order + delta + k as f64;
            sum += power * coeff / denom;
            let term_size = coeff * magnitude / denom.norm();
            if k > 0 && (term_size <= 1e-17 * sum.norm() || term_size < 1e-300) {
                return Ok(sum);
            }
            coeff *= (delta + k as f64 + 1.0) / (k as f64 + 1.0);
            power *= t0;
            magnitude *= t0;
        }
        Err(Error::Quadrature { error_estimate: f64::NAN, subdivisions: MAX_SERIES_TERMS })
    }

    /// `int_lo^hi (1 - x(z)^o) z dz` by quadrature.
    fn block_quad(&self, order: Complex64, lo: f64, hi: f64) -> Result<ComplexEstimate> {
        let r = integrate(|z| one_minus_pow(self.ln_x(z), order) * z, lo, hi, &geometric_breaks(lo, hi), self.tol)?;
        Ok(ComplexEstimate { value: r.value, abs_err: r.abs_err })
    }

    /// `int_0^outer (1 - x(z)^o) z dz`.
    fn block(&self, order: Complex64, outer: f64) -> Result<ComplexEstimate> {
        let t0 = self.split(order, outer);
        let t_outer = self.ln_x(outer).exp();
        let z0 = if t0 >= t_outer { outer } else { self.z_of_t(t0).min(outer) };
        let delta = 2.0 / self.alpha();
        let a = self.scale();
        let series = self.near_series(order, t0)? * (0.5 * a * a * delta);
        let near = Complex64::new(0.5 * z0 * z0, 0.0) - series;
        if z0 >= outer {
            return Ok(ComplexEstimate { value: near, abs_err: 1e-15 * near.norm() });
        }
        let far = self.block_quad(order, z0, outer)?;
        Ok(ComplexEstimate { value: near + far.value, abs_err: far.abs_err + 1e-15 * near.norm() })
    }

    /// `int_lo^hi (1 - (q x + 1 - q)^o) z dz`.
    fn classical(&self, order: Complex64, q: f64, lo: f64, hi: f64) -> Result<ComplexEstimate> {
        let start = (self.scale() / 64.0).max(lo);
        let mut breaks = if lo > 0.0 { vec![] } else { vec![start] };
        breaks.extend(geometric_breaks(start, hi));
        let r = integrate(|z| one_minus_pow(self.ln_b(q, z), order) * z, lo, hi, &breaks, self.tol)?;
        Ok(ComplexEstimate { value: r.value, abs_err: r.abs_err })
    }
}

fn validate(q: f64, scenario: &Scenario, quad: &QuadratureSpec) -> Result<()> {
    crate::aloha::check_q(q)?;
    scenario.validate()?;
    quad.validate()?;
    if quad.infinite_plane && scenario.channel.pathloss_exp <= 2.0 {
        return Err(Error::invalid("alpha", "the infinite-plane integral diverges for alpha <= 2"));
    }
    Ok(())
}

/// Extends a windowed radial integral to the whole plane by doubling the
/// outer radius until the increment is negligible.
fn extend_to_plane<F>(window: ComplexEstimate, outer: f64, quad: &QuadratureSpec, mut shell: F) -> Result<ComplexEstimate>
where
    F: FnMut(f64, f64) -> Result<ComplexEstimate>,
{
    let mut total = window;
    let mut lo = outer;
    for _ in 0..MAX_DOUBLINGS {
        let inc = shell(lo, 2.0 * lo)?;
        total.value += inc.value;
        total.abs_err += inc.abs_err;
        if inc.value.norm() <= quad.rel_tol * total.value.norm() {
            total.abs_err += inc.value.norm();
            return Ok(total);
        }
        lo *= 2.0;
    }
    Err(Error::Quadrature { error_estimate: total.abs_err, subdivisions: MAX_DOUBLINGS })
}

/// Log-PGFL exponent `psi(o)` with `E[prod_i base_i^o] = exp(psi(o))` over the
/// interferers. Block: `-2 pi q lambda int (1 - x^o) z dz`; classical:
/// `-2 pi lambda int (1 - (q x + 1 - q)^o) z dz`.
pub fn interference_log_integral(
    order: Complex64,
    q: f64,
    scenario: &Scenario,
    quad: &QuadratureSpec,
    protocol: Protocol,
) -> Result<ComplexEstimate> {
    validate(q, scenario, quad)?;
    let zero = ComplexEstimate { value: Complex64::new(0.0, 0.0), abs_err: 0.0 };
    if scenario.lambda == 0.0 || q == 0.0 || order == Complex64::new(0.0, 0.0) {
        return Ok(zero);
    }
    // Classical with q = 1 is the block integrand.
    let (protocol, density) = match protocol {
        Protocol::Block => (Protocol::Block, q * scenario.lambda),
        Protocol::Classical if q == 1.0 => (Protocol::Block, scenario.lambda),
        Protocol::Classical => (Protocol::Classical, scenario.lambda),
    };
    let scale = 2.0 * std::f64::consts::PI * density;
    let radial = Radial {
        scenario,
        tol: Tolerance { rel: quad.rel_tol, abs: quad.abs_tol / scale, max_subdivisions: quad.max_subdivisions },
    };
    let outer = quad.outer_limit;
    let window = match protocol {
        Protocol::Block => radial.block(order, outer)?,
        Protocol::Classical => radial.classical(order, q, 0.0, outer)?,
    };
    let integral = if quad.infinite_plane {
        extend_to_plane(window, outer, quad, |lo, hi| match protocol {
            Protocol::Block => radial.block_quad(order, lo, hi),
            Protocol::Classical => radial.classical(order, q, lo, hi),
        })?
    } else {
        window
    };
    Ok(ComplexEstimate { value: -integral.value * scale, abs_err: integral.abs_err * scale })
}

/// Integer moment of the conditional success probability: `E[P_blk^l]`
/// (block) or `E[(q P_cls)^l]` (classical).
pub fn moment_zeta(l: u32, q: f64, scenario: &Scenario, quad: &QuadratureSpec, protocol: Protocol) -> Result<Estimate> {
    if l == 0 {
        return Err(Error::invalid("l", "moment order must be >= 1"));
    }
    let order = Complex64::new(l as f64, 0.0);
    let psi = interference_log_integral(order, q, scenario, quad, protocol)?;
    let mut log_value = psi.value.re - l as f64 * scenario.noise_exponent();
    if protocol == Protocol::Classical {
        if q == 0.0 {
            return Ok(Estimate { value: 0.0, abs_err: 0.0 });
        }
        log_value += l as f64 * q.ln();
    }
    let value = log_value.exp();
    Ok(Estimate { value, abs_err: value * psi.abs_err })
}

/// Characteristic function `E[exp(j s ln P)]` of the log conditional success
/// probability (`P_blk` for block, `P_cls` for classical).
pub fn log_success_char_function(
    s: f64,
    q: f64,
    scenario: &Scenario,
    quad: &QuadratureSpec,
    protocol: Protocol,
) -> Result<ComplexEstimate> {
    let psi = interference_log_integral(Complex64::new(0.0, s), q, scenario, quad, protocol)?;
    let phase = Complex64::new(0.0, -s * scenario.noise_exponent());
    let value = (psi.value + phase).exp();
    Ok(ComplexEstimate { value, abs_err: value.norm() * psi.abs_err })
}

/// `E[ln P]` for the same variable as [`log_success_char_function`].
pub fn mean_log_success(q: f64, scenario: &Scenario, quad: &QuadratureSpec, protocol: Protocol) -> Result<Estimate> {
    validate(q, scenario, quad)?;
    let nu = scenario.noise_exponent();
    if scenario.lambda == 0.0 || q == 0.0 {
        return Ok(Estimate { value: -nu, abs_err: 0.0 });
    }
    let (block, density) = match protocol {
        Protocol::Block => (true, q * scenario.lambda),
        Protocol::Classical => (q == 1.0, scenario.lambda),
    };
    let scale = 2.0 * std::f64::consts::PI * density;
    let radial = Radial {
        scenario,
        tol: Tolerance { rel: quad.rel_tol, abs: quad.abs_tol / scale, max_subdivisions: quad.max_subdivisions },
    };
    let f = |z: f64| if block { radial.ln_x(z) * z } else { radial.ln_b(q, z) * z };
    let outer = quad.outer_limit;
    let (mut value, mut err) = if block {
        // int_0^{z(t0)} ln x z dz = (a^2 delta / 2) sum_k C(delta + k, k) t0^p (ln t0 / p - 1 / p^2), p = delta + k.
        let t0 = radial.split(Complex64::new(1.0, 0.0), outer);
        let t_outer = radial.ln_x(outer).exp();
        let z0 = if t0 >= t_outer { outer } else { radial.z_of_t(t0).min(outer) };
        let delta = 2.0 / radial.alpha();
        let a = radial.scale();
        let ln_t0 = t0.ln();
        let mut near = 0.0;
        let mut coeff = 1.0;
        let mut power = (delta * ln_t0).exp();
        for k in 0..MAX_SERIES_TERMS {
            let p = delta + k as f64;
            let term = coeff * power * (ln_t0 / p - 1.0 / (p * p));
            near += term;
            if k > 0 && term.abs() <= 1e-17 * near.abs() {
                break;
            }
            coeff *= (p + 1.0) / (k as f64 + 1.0);
            power *= t0;
        }
        near *= 0.5 * a * a * delta;
        if z0 < outer {
            let far = integrate(f, z0, outer, &geometric_breaks(z0, outer), radial.tol)?;
            (near + far.value, far.abs_err)
        } else {
            (near, 0.0)
        }
    } else {
        let start = radial.scale() / 64.0;
        let mut breaks = vec![start];
        breaks.extend(geometric_breaks(start, outer));
        let r = integrate(f, 0.0, outer, &breaks, radial.tol)?;
        (r.value, r.abs_err)
    };
    if quad.infinite_plane {
        let mut lo = outer;
        let mut converged = false;
        for _ in 0..MAX_DOUBLINGS {
            let inc = integrate(f, lo, 2.0 * lo, &[], radial.tol)?;
            value += inc.value;
            err += inc.abs_err;
            if inc.value.abs() <= quad.rel_tol * value.abs() {
                converged = true;
                break;
            }
            lo *= 2.0;
        }
        if !converged {
            return Err(Error::Quadrature { error_estimate: err, subdivisions: MAX_DOUBLINGS });
        }
    }
    Ok(Estimate { value: -nu + scale * value, abs_err: scale * err })
}

/// Probability that no interferer contributes: `exp(-q lambda pi L^2)` for
/// block, `exp(-lambda pi L^2)` for classical (zero on the infinite plane).
pub fn no_interferer_prob(q: f64, scenario: &Scenario, quad: &QuadratureSpec, protocol: Protocol) -> f64 {
    if quad.infinite_plane && scenario.lambda > 0.0 {
        return 0.0;
    }
    let density = match protocol {
        Protocol::Block => q * scenario.lambda,
        Protocol::Classical if q == 0.0 => 0.0,
        Protocol::Classical => scenario.lambda,
    };
    (-density * std::f64::consts::PI * quad.outer_limit * quad.outer_limit).exp()
}
