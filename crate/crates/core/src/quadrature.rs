//! Deterministic adaptive cubature over hyperrectangles.
//!
//! One dimension uses the Gauss–Kronrod G7/K15 pair; two or more use the
//! degree-7 Genz–Malik rule with its embedded degree-5 companion. Cells are
//! refined worst-error-first in batches, children of a batch may be
//! evaluated in parallel, and the final value is a pairwise sum over the
//! live cells in creation order, so results do not depend on thread timing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    /// Sum of the per-cell embedded-rule discrepancies.
    pub error_estimate: f64,
    /// Number of cells evaluated.
    pub cells: usize,
}

impl QuadratureResult {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            error_estimate: 0.0,
            cells: 0,
        }
    }

    /// Adds another independent piece of the same integral.
    pub fn combine(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            error_estimate: self.error_estimate + other.error_estimate,
            cells: self.cells + other.cells,
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            error_estimate: self.error_estimate * factor.abs(),
            cells: self.cells,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CubatureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on evaluated cells before a budget error is returned.
    pub max_cells: usize,
    /// Initial uniform subdivision count per dimension (missing entries mean 1).
    pub initial_splits: Vec<usize>,
    /// Number of worst cells refined per round.
    pub batch: usize,
    pub parallel: bool,
}

impl Default for CubatureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_cells: 2_000_000,
            initial_splits: Vec::new(),
            batch: 32,
            parallel: true,
        }
    }
}

// Gauss–Kronrod 7/15 nodes on [-1, 1] (non-negative half).
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
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone)]
struct Cell {
    lo: Vec<f64>,
    hi: Vec<f64>,
    value: f64,
    error: f64,
    split_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapKey {
    error: f64,
    id: usize,
}

impl Eq for HeapKey {}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn gauss_kronrod<F: Fn(&[f64]) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(&[center]);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(&[center - dx]) + f(&[center + dx]);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct GenzMalik {
    dim: usize,
    lambda2: f64,
    lambda4: f64,
    lambda5: f64,
    w: [f64; 5],
    we: [f64; 4],
}

impl GenzMalik {
    fn new(dim: usize) -> Self {
        let n = dim as f64;
        Self {
            dim,
            lambda2: (9.0_f64 / 70.0).sqrt(),
            lambda4: (9.0_f64 / 10.0).sqrt(),
            lambda5: (9.0_f64 / 19.0).sqrt(),
            w: [
                (12824.0 - 9120.0 * n + 400.0 * n * n) / 19683.0,
                980.0 / 6561.0,
                (1820.0 - 400.0 * n) / 19683.0,
                200.0 / 19683.0,
                6859.0 / 19683.0 / 2f64.powi(dim as i32),
            ],
            we: [
                (729.0 - 950.0 * n + 50.0 * n * n) / 729.0,
                245.0 / 486.0,
                (265.0 - 100.0 * n) / 1458.0,
                25.0 / 729.0,
            ],
        }
    }

    /// Returns (value, error, dimension to split).
    fn apply<F: Fn(&[f64]) -> f64>(&self, f: &F, lo: &[f64], hi: &[f64]) -> (f64, f64, usize) {
        let d = self.dim;
        let center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
        let volume: f64 = half.iter().map(|h| 2.0 * h).product();

        let f1 = f(&center);
        let ratio = (self.lambda2 * self.lambda2) / (self.lambda4 * self.lambda4);
        let mut f2 = 0.0;
        let mut f3 = 0.0;
        let mut diffs = vec![0.0; d];
        let mut x = center.clone();
        for i in 0..d {
            x[i] = center[i] - self.lambda2 * half[i];
            let a = f(&x);
            x[i] = center[i] + self.lambda2 * half[i];
            let b = f(&x);
            x[i] = center[i] - self.lambda4 * half[i];
            let c = f(&x);
            x[i] = center[i] + self.lambda4 * half[i];
            let e = f(&x);
            x[i] = center[i];
            f2 += a + b;
            f3 += c + e;
            diffs[i] = (a + b - 2.0 * f1 - ratio * (c + e - 2.0 * f1)).abs();
        }

        let mut f4 = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                for (si, sj) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                    x[i] = center[i] + si * self.lambda4 * half[i];
                    x[j] = center[j] + sj * self.lambda4 * half[j];
                    f4 += f(&x);
                }
                x[i] = center[i];
                x[j] = center[j];
            }
        }

        let mut f5 = 0.0;
        for mask in 0..(1usize << d) {
            for (i, xi) in x.iter_mut().enumerate() {
                let s = if mask & (1 << i) != 0 { 1.0 } else { -1.0 };
                *xi = center[i] + s * self.lambda5 * half[i];
            }
            f5 += f(&x);
        }

        let w = &self.w;
        let we = &self.we;
        let value = volume * (w[0] * f1 + w[1] * f2 + w[2] * f3 + w[3] * f4 + w[4] * f5);
        let lower = volume * (we[0] * f1 + we[1] * f2 + we[2] * f3 + we[3] * f4);
        let error = (value - lower).abs();

        let max_diff = diffs.iter().cloned().fold(0.0, f64::max);
        let split = if max_diff <= 1e-14 * (f1.abs() + 1e-300) {
            // Flat fourth differences: split the widest side.
            let mut best = 0;
            for i in 1..d {
                if half[i] > half[best] {
                    best = i;
                }
            }
            best
        } else {
            let mut best = 0;
            for i in 1..d {
                if diffs[i] > diffs[best] {
                    best = i;
                }
            }
            best
        };
        (value, error, split)
    }
}

enum Rule {
    Kronrod,
    GenzMalik(GenzMalik),
}

impl Rule {
    fn eval<F: Fn(&[f64]) -> f64>(&self, f: &F, lo: Vec<f64>, hi: Vec<f64>) -> Cell {
        match self {
            Rule::Kronrod => {
                let (value, error) = gauss_kronrod(f, lo[0], hi[0]);
                Cell {
                    lo,
                    hi,
                    value,
                    error,
                    split_dim: 0,
                }
            }
            Rule::GenzMalik(gm) => {
                let (value, error, split_dim) = gm.apply(f, &lo, &hi);
                Cell {
                    lo,
                    hi,
                    value,
                    error,
                    split_dim,
                }
            }
        }
    }
}

/// Pairwise (cascade) summation in slice order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Integrates `f` over the box `[lower, upper]`.
pub fn integrate<F>(f: F, lower: &[f64], upper: &[f64], opts: &CubatureOptions) -> Result<QuadratureResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = lower.len();
    if dim == 0 || upper.len() != dim {
        return Err(Error::Domain(
            "integration box must have matching non-empty bounds".into(),
        ));
    }
    if lower.iter().zip(upper).any(|(a, b)| !(a.is_finite() && b.is_finite())) {
        return Err(Error::Domain("integration bounds must be finite".into()));
    }
    let rule = if dim == 1 {
        Rule::Kronrod
    } else {
        Rule::GenzMalik(GenzMalik::new(dim))
    };

    // Initial grid.
    let splits: Vec<usize> = (0..dim)
        .map(|i| opts.initial_splits.get(i).copied().unwrap_or(1).max(1))
        .collect();
    let mut boxes: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new())];
    for i in 0..dim {
        let width = (upper[i] - lower[i]) / splits[i] as f64;
        let mut next = Vec::with_capacity(boxes.len() * splits[i]);
        for (lo, hi) in &boxes {
            for k in 0..splits[i] {
                let mut l = lo.clone();
                let mut h = hi.clone();
                l.push(lower[i] + width * k as f64);
                h.push(if k + 1 == splits[i] {
                    upper[i]
                } else {
                    lower[i] + width * (k + 1) as f64
                });
                next.push((l, h));
            }
        }
        boxes = next;
    }

    let eval_all = |boxes: Vec<(Vec<f64>, Vec<f64>)>| -> Vec<Cell> {
        if opts.parallel && boxes.len() > 1 {
            boxes
                .into_par_iter()
                .map(|(lo, hi)| rule.eval(&f, lo, hi))
                .collect()
        } else {
            boxes
                .into_iter()
                .map(|(lo, hi)| rule.eval(&f, lo, hi))
                .collect()
        }
    };

    let mut cells: Vec<Option<Cell>> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut total_value = 0.0;
    let mut total_error = 0.0;
    let mut evaluated = 0usize;

    for cell in eval_all(boxes) {
        total_value += cell.value;
        total_error += cell.error;
        heap.push(HeapKey {
            error: cell.error,
            id: cells.len(),
        });
        cells.push(Some(cell));
        evaluated += 1;
    }

    let batch = opts.batch.max(1);
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total_value.abs());
        if total_error <= target || !total_error.is_finite() {
            break;
        }
        if evaluated + 2 * batch.min(heap.len()) > opts.max_cells {
            let (value, error) = live_totals(&cells);
            return Err(Error::Budget {
                value,
                error_estimate: error,
                cells: evaluated,
            });
        }
        let mut children = Vec::with_capacity(2 * batch);
        for _ in 0..batch {
            let Some(key) = heap.pop() else { break };
            let cell = cells[key.id].take().expect("live cell");
            total_value -= cell.value;
            total_error -= cell.error;
            let d = cell.split_dim;
            let mid = 0.5 * (cell.lo[d] + cell.hi[d]);
            let mut hi_left = cell.hi.clone();
            hi_left[d] = mid;
            let mut lo_right = cell.lo.clone();
            lo_right[d] = mid;
            children.push((cell.lo, hi_left));
            children.push((lo_right, cell.hi));
            // Stop popping once the remaining error is already acceptable.
            let remaining = opts.abs_tol.max(opts.rel_tol * total_value.abs());
            if total_error <= remaining * 0.5 {
                break;
            }
        }
        for cell in eval_all(children) {
            total_value += cell.value;
            total_error += cell.error;
            heap.push(HeapKey {
                error: cell.error,
                id: cells.len(),
            });
            cells.push(Some(cell));
            evaluated += 1;
        }
        // Guard against drift in the running totals.
        if total_error < 0.0 {
            total_error = live_totals(&cells).1;
        }
    }

    let (value, error) = live_totals(&cells);
    if !value.is_finite() {
        return Err(Error::Domain("integrand produced a non-finite value".into()));
    }
    Ok(QuadratureResult {
        value,
        error_estimate: error,
        cells: evaluated,
    })
}

fn live_totals(cells: &[Option<Cell>]) -> (f64, f64) {
    let values: Vec<f64> = cells.iter().flatten().map(|c| c.value).collect();
    let errors: Vec<f64> = cells.iter().flatten().map(|c| c.error).collect();
    (pairwise_sum(&values), pairwise_sum(&errors))
}

/// One-dimensional convenience wrapper around [`integrate`].
pub fn integrate_1d<F>(f: F, a: f64, b: f64, opts: &CubatureOptions) -> Result<QuadratureResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    integrate(f, &[a], &[b], opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn opts(rel: f64) -> CubatureOptions {
        CubatureOptions {
            rel_tol: rel,
            ..CubatureOptions::default()
        }
    }

    #[test]
    fn kronrod_weights_sum_to_interval_length() {
        let s: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        assert_relative_eq!(s, 2.0, max_relative = 1e-14);
        let g: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert_relative_eq!(g, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn one_dimensional_polynomial_and_peak() {
        let r = integrate_1d(|x| x[0].powi(5), 0.0, 2.0, &opts(1e-12)).unwrap();
        assert_relative_eq!(r.value, 64.0 / 6.0, max_relative = 1e-13);
        let eps = 1e-4;
        let r = integrate_1d(|x| eps / (x[0] * x[0] + eps * eps), -1.0, 1.0, &opts(1e-11)).unwrap();
        assert_relative_eq!(r.value, 2.0 * (1.0 / eps).atan(), max_relative = 1e-10);
    }

    #[test]
    fn genz_malik_exact_for_degree_seven() {
        for dim in 2..=4 {
            let lo = vec![-0.3; dim];
            let hi = vec![1.1; dim];
            let f = |x: &[f64]| x.iter().map(|v| v.powi(6) + v.powi(7)).product::<f64>();
            let one = (1.1f64.powi(7) + 0.3f64.powi(7)) / 7.0 + (1.1f64.powi(8) - 0.3f64.powi(8)) / 8.0;
            let exact_poly = |x: &[f64]| x.iter().map(|v| v * v * v).sum::<f64>() + x[0].powi(4) * x[1].powi(3);
            let w = 1.4f64;
            let cube_int = (1.1f64.powi(4) - 0.3f64.powi(4)) / 4.0;
            let exact = dim as f64 * cube_int * w.powi(dim as i32 - 1)
                + (1.1f64.powi(5) + 0.3f64.powi(5)) / 5.0 * cube_int * w.powi(dim as i32 - 2);
            let r = integrate(exact_poly, &lo, &hi, &CubatureOptions { max_cells: 3, ..opts(1e-30) });
            // A degree-7 polynomial is integrated exactly by the first cell.
            let v = match r {
                Ok(r) => r.value,
                Err(Error::Budget { value, .. }) => value,
                Err(e) => panic!("{e}"),
            };
            assert_relative_eq!(v, exact, max_relative = 1e-12);
            let r = integrate(f, &lo, &hi, &opts(1e-8)).unwrap();
            assert_relative_eq!(r.value, one.powi(dim as i32), max_relative = 1e-7);
        }
    }

    #[test]
    fn gaussian_in_three_dimensions() {
        let f = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
        let r = integrate(f, &[-6.0; 3], &[6.0; 3], &opts(1e-10)).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::PI.powf(1.5), max_relative = 1e-9);
        assert!(r.error_estimate <= 1e-10 * r.value);
    }

    #[test]
    fn budget_error_carries_partial_result() {
        let f = |x: &[f64]| 1.0 / (x[0].abs() + 1e-12).sqrt();
        let err = integrate_1d(f, -1.0, 1.0, &CubatureOptions { max_cells: 40, ..opts(1e-15) })
            .unwrap_err();
        match err {
            Error::Budget { value, cells, .. } => {
                assert!(value > 3.0);
                assert!(cells <= 40);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn deterministic_across_parallel_settings() {
        let f = |x: &[f64]| ((x[0] * 7.0).sin() * (x[1] * 3.0).cos()).exp() / (0.01 + x[0] * x[0] + x[1] * x[1]);
        let a = integrate(f, &[-1.0, -1.0], &[1.0, 1.0], &opts(1e-9)).unwrap();
        let b = integrate(f, &[-1.0, -1.0], &[1.0, 1.0], &opts(1e-9)).unwrap();
        let c = integrate(
            f,
            &[-1.0, -1.0],
            &[1.0, 1.0],
            &CubatureOptions {
                parallel: false,
                ..opts(1e-9)
            },
        )
        .unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn halving_tolerance_moves_value_within_previous_estimate() {
        let f = |x: &[f64]| 1.0 / (1e-3 + x[0] * x[0] + 0.5 * x[1] * x[1]).powf(0.75);
        let mut prev: Option<QuadratureResult> = None;
        let mut tol = 1e-5;
        for _ in 0..5 {
            let r = integrate(f, &[-1.0, -1.0], &[1.0, 1.0], &opts(tol)).unwrap();
            if let Some(p) = prev {
                assert!((r.value - p.value).abs() <= p.error_estimate);
            }
            prev = Some(r);
            tol *= 0.5;
        }
    }

    #[test]
    fn pairwise_sum_matches_naive_for_short_input() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 4950.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
