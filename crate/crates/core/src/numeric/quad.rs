//! Adaptive Gauss-Kronrod (7/15) quadrature and Gauss-Legendre rules.
//!
//! The integrand may be real, complex or a vector of either, so one sweep of
//! expensive evaluations (a resolvent at one spectral point, say) can feed
//! many integrals at once.

use std::collections::BinaryHeap;

use num_complex::Complex;

use crate::scalar::Real;

/// Values that can be accumulated by a quadrature rule.
pub trait QuadValue<T>: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, w: T);
    /// Largest component magnitude.
    fn max_norm(&self) -> T;
}

macro_rules! scalar_value {
    ($t:ty) => {
        impl QuadValue<$t> for $t {
            fn zero_like(&self) -> Self {
                0.0
            }
            fn add_scaled(&mut self, other: &Self, w: $t) {
                *self += *other * w;
            }
            fn max_norm(&self) -> $t {
                self.abs()
            }
        }
        impl QuadValue<$t> for Complex<$t> {
            fn zero_like(&self) -> Self {
                Complex::new(0.0, 0.0)
            }
            fn add_scaled(&mut self, other: &Self, w: $t) {
                *self += *other * w;
            }
            fn max_norm(&self) -> $t {
                self.norm()
            }
        }
    };
}
scalar_value!(f32);
scalar_value!(f64);

impl<T: Real, V: QuadValue<T>> QuadValue<T> for Vec<V> {
    fn zero_like(&self) -> Self {
        self.iter().map(|v| v.zero_like()).collect()
    }
    fn add_scaled(&mut self, other: &Self, w: T) {
        for (a, b) in self.iter_mut().zip(other) {
            a.add_scaled(b, w);
        }
    }
    fn max_norm(&self) -> T {
        self.iter().fold(T::zero(), |m, v| m.max(v.max_norm()))
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Debug)]
pub struct QuadResult<V, T> {
    pub value: V,
    pub error: T,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct GaussKronrod<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_intervals: usize,
}

struct Panel<V, T> {
    a: T,
    b: T,
    value: V,
    error: T,
}

impl<V, T: PartialOrd> PartialEq for Panel<V, T> {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl<V, T: PartialOrd> Eq for Panel<V, T> {}
impl<V, T: PartialOrd> PartialOrd for Panel<V, T> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<V, T: PartialOrd> Ord for Panel<V, T> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.partial_cmp(&o.error).unwrap_or(std::cmp::Ordering::Equal)
    }
}

impl<T: Real> GaussKronrod<T> {
    pub fn new(rel_tol: T, abs_tol: T) -> Self {
        Self { rel_tol, abs_tol, max_intervals: 2000 }
    }

    /// One 15-point Kronrod panel with its embedded Gauss error estimate.
    pub fn panel<V, F>(f: &mut F, a: T, b: T) -> (V, T)
    where
        V: QuadValue<T>,
        F: FnMut(T) -> V,
    {
        let c = (a + b) * T::lit(0.5);
        let r = (b - a) * T::lit(0.5);
        let fc = f(c);
        let mut k = fc.zero_like();
        let mut g = fc.zero_like();
        k.add_scaled(&fc, T::lit(WGK[7]));
        g.add_scaled(&fc, T::lit(WG[3]));
        for j in 0..7 {
            let dx = r * T::lit(XGK[j]);
            let f1 = f(c - dx);
            let f2 = f(c + dx);
            k.add_scaled(&f1, T::lit(WGK[j]));
            k.add_scaled(&f2, T::lit(WGK[j]));
            if j % 2 == 1 {
                g.add_scaled(&f1, T::lit(WG[j / 2]));
                g.add_scaled(&f2, T::lit(WG[j / 2]));
            }
        }
        let mut diff = k.clone();
        diff.add_scaled(&g, -T::one());
        let scale = r.abs();
        let mut value = k.zero_like();
        value.add_scaled(&k, r);
        (value, diff.max_norm() * scale)
    }

    /// Globally adaptive integration over `[a, b]`.
    pub fn integrate<V, F>(&self, mut f: F, a: T, b: T) -> QuadResult<V, T>
    where
        V: QuadValue<T>,
        F: FnMut(T) -> V,
    {
        let (v0, e0) = Self::panel(&mut f, a, b);
        let mut evaluations = 15;
        let mut total = v0.clone();
        let mut total_err = e0;
        let mut heap = BinaryHeap::new();
        heap.push(Panel { a, b, value: v0, error: e0 });
        let mut converged = false;
        loop {
            let target = self.abs_tol.max(self.rel_tol * total.max_norm());
            if total_err <= target {
                converged = true;
                break;
            }
            if heap.len() >= self.max_intervals {
                break;
            }
            let worst = heap.pop().expect("non-empty heap");
            let mid = (worst.a + worst.b) * T::lit(0.5);
            let (vl, el) = Self::panel(&mut f, worst.a, mid);
            let (vr, er) = Self::panel(&mut f, mid, worst.b);
            evaluations += 30;
            total.add_scaled(&worst.value, -T::one());
            total.add_scaled(&vl, T::one());
            total.add_scaled(&vr, T::one());
            total_err = total_err - worst.error + el + er;
            heap.push(Panel { a: worst.a, b: mid, value: vl, error: el });
            heap.push(Panel { a: mid, b: worst.b, value: vr, error: er });
        }
        // Re-sum to shed drift from the running updates.
        let mut value = total.zero_like();
        let mut error = T::zero();
        for p in heap.iter() {
            value.add_scaled(&p.value, T::one());
            error = error + p.error;
        }
        QuadResult { value, error, evaluations, converged }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let nf = T::from_usize(n).unwrap();
    for i in 0..n.div_ceil(2) {
        let fi = T::from_usize(i).unwrap();
        let mut z = (T::PI() * (fi + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z = z - dz;
            if dz.abs() <= T::epsilon() * T::lit(2.0) {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != T::zero() { d } else { dp };
        let wi = T::lit(2.0) / ((T::one() - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre<T: Real>(n: usize, z: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = z;
    for k in 2..=n {
        let kf = T::from_usize(k).unwrap();
        let p2 = ((T::lit(2.0) * kf - T::one()) * z * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (T::one(), T::zero());
    }
    let nf = T::from_usize(n).unwrap();
    let dp = nf * (z * p1 - p0) / (z * z - T::one());
    (p1, dp)
}
