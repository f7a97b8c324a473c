//! Evans function `W_lambda(y) = phi+ phi-' - phi+' phi-` and the auxiliary
//! determinants of the growth/decay modes.

use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

use crate::front::FrontProfile;
use crate::green_lambda::Resolvent;
use crate::model::Weight;
use crate::modes::{solve_mode, ModeError, ModeKind, ModeOptions, ModeSolution, SpectralPoint};
use crate::operator::Coefficients;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvansError {
    #[error(transparent)]
    Mode(#[from] ModeError),
    #[error("phase jump {jump:.3} rad between contour nodes {index} and {next}; refine the contour")]
    InsufficientResolution { jump: f64, index: usize, next: usize },
    #[error("function vanishes on the contour at node {0}")]
    ZeroOnContour(usize),
}

pub fn wronskian(op: &dyn Coefficients, point: SpectralPoint, y: f64, opts: &ModeOptions) -> Result<C, ModeError> {
    Ok(Resolvent::new(op, point, &[y], opts)?.wronskian(0))
}

/// `W` divided by the norms of the two mode vectors at `y`.
pub fn normalized_wronskian(op: &dyn Coefficients, point: SpectralPoint, y: f64, opts: &ModeOptions) -> Result<C, ModeError> {
    Ok(Resolvent::new(op, point, &[y], opts)?.normalized_wronskian(0))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AuxDeterminants {
    /// `det(phi+, psi+)`
    pub j: C,
    /// `det(phi-, psi+)`
    pub i: C,
    /// `det(phi-, psi-)`
    pub h: C,
    /// `det(phi+, psi-)`
    pub k: C,
}

fn det_at(a: &ModeSolution, b: &ModeSolution, idx: usize) -> C {
    let y = a.nodes[idx];
    let d = a.z[idx][0] * b.z[idx][1] - a.z[idx][1] * b.z[idx][0];
    ((a.rate + b.rate) * y + a.log_scale[idx] + b.log_scale[idx]).exp() * d
}

pub fn aux_determinants(op: &dyn Coefficients, point: SpectralPoint, y: f64, opts: &ModeOptions) -> Result<AuxDeterminants, ModeError> {
    let nodes = [y];
    let pp = solve_mode(op, ModeKind::PhiPlus, &point, &nodes, opts)?;
    let pm = solve_mode(op, ModeKind::PhiMinus, &point, &nodes, opts)?;
    let sp = solve_mode(op, ModeKind::PsiPlus, &point, &nodes, opts)?;
    let sm = solve_mode(op, ModeKind::PsiMinus, &point, &nodes, opts)?;
    Ok(AuxDeterminants { j: det_at(&pp, &sp, 0), i: det_at(&pm, &sp, 0), h: det_at(&pm, &sm, 0), k: det_at(&pp, &sm, 0) })
}

#[derive(Clone, Debug, Serialize)]
pub struct EvansSample {
    pub point: SpectralPoint,
    pub w0: C,
    pub y: f64,
    pub w: C,
    pub aux: Option<AuxDeterminants>,
}

/// `W_0(y)` after rescaling phi- to match `omega^{-1} q'` by least squares
/// on `[-5, 5]`, with the relative mismatch of that match.
pub fn matched_wronskian_at_zero(
    op: &dyn Coefficients,
    profile: &FrontProfile,
    weight: &Weight<f64>,
    y: f64,
    opts: &ModeOptions,
) -> Result<(C, f64), ModeError> {
    let mut nodes: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.25).collect();
    nodes.push(y);
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup();
    let res = Resolvent::new(op, SpectralPoint::at(C::new(0.0, 0.0)), &nodes, opts)?;
    let mut num = C::new(0.0, 0.0);
    let mut den = 0.0;
    let mut pairs = Vec::new();
    for (i, &x) in nodes.iter().enumerate() {
        if x.abs() > 5.0 {
            continue;
        }
        let target = profile.dq_at(x) / weight.value(x);
        let v = res.phi_minus.value(i)[0];
        num += v * target;
        den += target * target;
        pairs.push((v, target));
    }
    let k = num / den;
    let scale = pairs.iter().fold(0.0f64, |m, (_, t)| m.max(t.abs()));
    let err = pairs.iter().fold(0.0f64, |m, (v, t)| m.max((*v / k - *t).norm())) / scale;
    let j = nodes.iter().position(|&v| v == y).unwrap();
    Ok((res.wronskian(j) / k, err))
}

/// Winding number of a closed sampled curve around the origin. The last
/// node connects back to the first.
pub fn winding_number(values: &[C]) -> Result<i64, EvansError> {
    let n = values.len();
    let mut total = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        if values[i].norm() == 0.0 {
            return Err(EvansError::ZeroOnContour(i));
        }
        let jump = (values[j] / values[i]).arg();
        if jump.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(EvansError::InsufficientResolution { jump, index: i, next: j });
        }
        total += jump;
    }
    Ok((total / (2.0 * std::f64::consts::PI)).round() as i64)
}

/// Counter-clockwise rectangle boundary with about `n` nodes spread by
/// arc length.
pub fn rectangle_contour(re: (f64, f64), im: (f64, f64), n: usize) -> Vec<C> {
    let corners = [C::new(re.0, im.0), C::new(re.1, im.0), C::new(re.1, im.1), C::new(re.0, im.1)];
    let perim = 2.0 * ((re.1 - re.0) + (im.1 - im.0));
    let mut out = Vec::with_capacity(n + 4);
    for k in 0..4 {
        let a = corners[k];
        let b = corners[(k + 1) % 4];
        let m = (((b - a).norm() / perim) * n as f64).ceil().max(1.0) as usize;
        for s in 0..m {
            out.push(a + (b - a) * (s as f64 / m as f64));
        }
    }
    out
}

/// Winding number of `lambda -> W_lambda(0)` along a closed contour.
pub fn no_unstable_spectrum_scan(op: &dyn Coefficients, contour: &[C], opts: &ModeOptions) -> Result<i64, EvansError> {
    let values = contour
        .iter()
        .map(|&l| wronskian(op, SpectralPoint::at(l), 0.0, opts))
        .collect::<Result<Vec<_>, _>>()?;
    winding_number(&values)
}
