//! Globally adaptive 21-point Gauss-Kronrod quadrature for scalar, complex and
//! vector-valued integrands.

use num_complex::Complex64;

use crate::{Error, Result};

// Kronrod abscissae on [0, 1]; odd indices are the 10-point Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_931_817,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Values the integrator can accumulate.
pub trait QuadValue: Clone {
    fn zeros_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, w: f64);
    /// Magnitude used for error control (max-norm for vectors).
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zeros_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += w * other;
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zeros_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other * w;
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl QuadValue for Vec<f64> {
    fn zeros_like(&self) -> Self {
        vec![0.0; self.len()]
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += w * b;
        }
    }
    fn magnitude(&self) -> f64 {
        self.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Integral value with an absolute error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Integral<V> {
    pub value: V,
    pub abs_err: f64,
    pub subdivisions: usize,
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
}

struct Segment<V> {
    a: f64,
    b: f64,
    value: V,
    err: f64,
}

/// One Kronrod/Gauss pair on `[a, b]`; the error is the Kronrod-Gauss gap.
pub fn gk21<V: QuadValue, F: FnMut(f64) -> V>(f: &mut F, a: f64, b: f64) -> (V, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc.zeros_like();
    let mut gauss = fc.zeros_like();
    kronrod.add_scaled(&fc, WGK[10]);
    for (j, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let f1 = f(center - half * x);
        let f2 = f(center + half * x);
        kronrod.add_scaled(&f1, w);
        kronrod.add_scaled(&f2, w);
        if j % 2 == 1 {
            gauss.add_scaled(&f1, WG[j / 2]);
            gauss.add_scaled(&f2, WG[j / 2]);
        }
    }
    let mut diff = kronrod.clone();
    diff.add_scaled(&gauss, -1.0);
    let mut value = kronrod.zeros_like();
    value.add_scaled(&kronrod, half);
    (value, diff.magnitude() * half.abs())
}

/// Adaptive integration over `[a, b]` with initial breakpoints `breaks`
/// (points outside the open interval are ignored). Bisects the worst segment until
/// the total error estimate is below `max(abs, rel * |I|)`.
pub fn integrate<V: QuadValue, F: FnMut(f64) -> V>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Integral<V>> {
    let mut points = Vec::with_capacity(breaks.len() + 2);
    points.push(a);
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    points.extend(inner);
    points.push(b);
    let mut segments: Vec<Segment<V>> = points
        .windows(2)
        .map(|w| {
            let (value, err) = gk21(&mut f, w[0], w[1]);
            Segment { a: w[0], b: w[1], value, err }
        })
        .collect();
    let mut subdivisions = 0;
    loop {
        let mut total = segments[0].value.zeros_like();
        let mut err = 0.0;
        for s in &segments {
            total.add_scaled(&s.value, 1.0);
            err += s.err;
        }
        if err <= tol.abs.max(tol.rel * total.magnitude()) {
            return Ok(Integral { value: total, abs_err: err, subdivisions });
        }
        if subdivisions >= tol.max_subdivisions {
            return Err(Error::Quadrature { error_estimate: err, subdivisions });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval can no longer be split in floating point.
            return Err(Error::Quadrature { error_estimate: err, subdivisions });
        }
        let (v1, e1) = gk21(&mut f, seg.a, mid);
        let (v2, e2) = gk21(&mut f, mid, seg.b);
        segments.push(Segment { a: seg.a, b: mid, value: v1, err: e1 });
        segments.push(Segment { a: mid, b: seg.b, value: v2, err: e2 });
        subdivisions += 1;
    }
}

/// Neumaier-compensated sum that also tracks the sum of magnitudes.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
    magnitude: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
        self.magnitude += x.abs();
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    /// Sum of |terms| divided by |sum|; large values mean cancellation.
    pub fn cancellation(&self) -> f64 {
        let v = self.value().abs();
        if v > 0.0 {
            self.magnitude / v
        } else if self.magnitude > 0.0 {
            f64::INFINITY
        } else {
            1.0
        }
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }
}
