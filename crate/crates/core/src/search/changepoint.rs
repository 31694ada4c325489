//! Binary segmentation under a piecewise-linear least-squares cost.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Prefix sums giving the residual sum of squares of a least-squares line
/// over any `[a, b)` in O(1).
#[derive(Debug, Clone)]
pub struct LinearCost {
    n: usize,
    // time is rescaled to [0, 1] to keep the moments well conditioned
    st: Vec<f64>,
    stt: Vec<f64>,
    sy: Vec<f64>,
    sty: Vec<f64>,
    syy: Vec<f64>,
}

impl LinearCost {
    pub fn new(values: &[f64]) -> Self {
        let n = values.len();
        let scale = n.max(1) as f64;
        let mut st = vec![0.0; n + 1];
        let mut stt = vec![0.0; n + 1];
        let mut sy = vec![0.0; n + 1];
        let mut sty = vec![0.0; n + 1];
        let mut syy = vec![0.0; n + 1];
        for (i, &y) in values.iter().enumerate() {
            let t = i as f64 / scale;
            st[i + 1] = st[i] + t;
            stt[i + 1] = stt[i] + t * t;
            sy[i + 1] = sy[i] + y;
            sty[i + 1] = sty[i] + t * y;
            syy[i + 1] = syy[i] + y * y;
        }
        Self {
            n,
            st,
            stt,
            sy,
            sty,
            syy,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Residual sum of squares of the best line through `values[a..b]`.
    pub fn cost(&self, a: usize, b: usize) -> f64 {
        let m = (b - a) as f64;
        if b - a < 2 {
            return 0.0;
        }
        let d = |v: &[f64]| v[b] - v[a];
        let (st, stt, sy, sty, syy) = (
            d(&self.st),
            d(&self.stt),
            d(&self.sy),
            d(&self.sty),
            d(&self.syy),
        );
        let ctt = stt - st * st / m;
        let cty = sty - st * sy / m;
        let cyy = syy - sy * sy / m;
        let sse = if ctt > 0.0 {
            cyy - cty * cty / ctt
        } else {
            cyy
        };
        sse.max(0.0)
    }
}

/// Noise standard deviation from the median absolute first difference.
pub fn noise_sigma(values: &[f64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    let mut d: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let med = if d.len().is_multiple_of(2) {
        0.5 * (d[mid - 1] + d[mid])
    } else {
        d[mid]
    };
    med / (0.6745 * std::f64::consts::SQRT_2)
}

/// Parameters of [`binary_segmentation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationParams {
    /// Penalty multiplier: a split must reduce the cost by more than
    /// `beta * sigma^2 * ln(n)`.
    pub beta: f64,
    /// Shortest segment either side of a split.
    pub min_size: usize,
    /// Upper bound on the number of breakpoints, most significant first.
    pub max_breakpoints: usize,
    /// Lower bound applied to the estimated noise level.
    pub sigma_floor: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            beta: 3.0,
            min_size: 4,
            max_breakpoints: 24,
            sigma_floor: 1e-3,
        }
    }
}

struct Split {
    gain: f64,
    at: usize,
    a: usize,
    b: usize,
}

impl PartialEq for Split {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Split {}
impl PartialOrd for Split {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Split {
    fn cmp(&self, other: &Self) -> Ordering {
        // larger gain first, then earlier position
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.at.cmp(&self.at))
    }
}

fn best_split(cost: &LinearCost, a: usize, b: usize, min_size: usize) -> Option<Split> {
    if b - a < 2 * min_size {
        return None;
    }
    let whole = cost.cost(a, b);
    let mut best: Option<Split> = None;
    for s in a + min_size..=b - min_size {
        let gain = whole - cost.cost(a, s) - cost.cost(s, b);
        // tiny relative margin so rounding noise cannot reorder near ties
        let better = match &best {
            None => true,
            Some(cur) => gain > cur.gain + 1e-12 * cur.gain.abs().max(1.0),
        };
        if better {
            best = Some(Split { gain, at: s, a, b });
        }
    }
    best
}

/// Breakpoint indices (sorted, strictly inside `(0, len)`) found by greedy
/// binary segmentation. Splits are taken in order of decreasing cost
/// reduction while the reduction exceeds the penalty.
pub fn binary_segmentation(values: &[f64], params: &SegmentationParams) -> Vec<usize> {
    let n = values.len();
    if n < 2 * params.min_size.max(1) {
        return Vec::new();
    }
    let min_size = params.min_size.max(1);
    let cost = LinearCost::new(values);
    let sigma = noise_sigma(values).max(params.sigma_floor);
    let penalty = params.beta * sigma * sigma * (n as f64).ln();

    let mut heap = BinaryHeap::new();
    heap.extend(best_split(&cost, 0, n, min_size));
    let mut out = Vec::new();
    while let Some(split) = heap.pop() {
        if out.len() >= params.max_breakpoints || split.gain <= penalty {
            break;
        }
        out.push(split.at);
        heap.extend(best_split(&cost, split.a, split.at, min_size));
        heap.extend(best_split(&cost, split.at, split.b, min_size));
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn brute_sse(y: &[f64]) -> f64 {
        let n = y.len() as f64;
        let t: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
        let tm = t.iter().sum::<f64>() / n;
        let ym = y.iter().sum::<f64>() / n;
        let sxx: f64 = t.iter().map(|v| (v - tm).powi(2)).sum();
        let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        t.iter()
            .zip(y)
            .map(|(a, b)| (b - ym - slope * (a - tm)).powi(2))
            .sum()
    }

    #[test]
    fn cost_matches_direct_regression() {
        let y: Vec<f64> = (0..40)
            .map(|i| ((i * 7 % 11) as f64).sin() * 3.0 + i as f64 * 0.1)
            .collect();
        let c = LinearCost::new(&y);
        for (a, b) in [(0, 40), (3, 9), (10, 31), (5, 7)] {
            assert!(
                (c.cost(a, b) - brute_sse(&y[a..b])).abs() < 1e-8,
                "{a}..{b}"
            );
        }
    }

    fn brute_single_split(y: &[f64], min_size: usize) -> usize {
        let mut best = (f64::INFINITY, 0);
        for s in min_size..=y.len() - min_size {
            let c = brute_sse(&y[..s]) + brute_sse(&y[s..]);
            if c < best.0 {
                best = (c, s);
            }
        }
        best.1
    }

    #[test]
    fn level_shift_found_near_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y: Vec<f64> = (0..100)
            .map(|i| {
                let level = if i < 50 { 0.0 } else { 1.0 };
                level + 0.05 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let oracle = brute_single_split(&y, 4);
        assert!(oracle.abs_diff(50) <= 2);
        let bps = binary_segmentation(&y, &SegmentationParams::default());
        assert!(bps.iter().any(|&b| b.abs_diff(50) <= 2), "{bps:?}");
        assert!(bps.contains(&oracle), "{bps:?} vs {oracle}");
    }

    #[test]
    fn clean_step_is_exact() {
        let y: Vec<f64> = (0..100).map(|i| if i < 50 { 0.0 } else { 1.0 }).collect();
        assert_eq!(
            binary_segmentation(&y, &SegmentationParams::default()),
            vec![50]
        );
    }

    #[test]
    fn constant_and_linear_have_no_breakpoints() {
        let flat = vec![3.0; 200];
        assert!(binary_segmentation(&flat, &SegmentationParams::default()).is_empty());
        let ramp: Vec<f64> = (0..200).map(|i| i as f64 * 0.3 - 7.0).collect();
        assert!(binary_segmentation(&ramp, &SegmentationParams::default()).is_empty());
    }

    #[test]
    fn kink_is_located() {
        let y: Vec<f64> = (0..120)
            .map(|i| {
                if i < 80 {
                    i as f64 * 0.05
                } else {
                    4.0 - (i - 80) as f64 * 0.2
                }
            })
            .collect();
        let bps = binary_segmentation(&y, &SegmentationParams::default());
        assert!(bps.iter().any(|&b| b.abs_diff(80) <= 1), "{bps:?}");
    }

    #[test]
    fn breakpoint_cap_respected() {
        let y: Vec<f64> = (0..400).map(|i| ((i / 10) % 2) as f64).collect();
        let p = SegmentationParams {
            max_breakpoints: 5,
            ..Default::default()
        };
        assert_eq!(binary_segmentation(&y, &p).len(), 5);
    }

    #[test]
    fn noise_sigma_of_white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..20_000)
            .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        assert!((noise_sigma(&y) - 2.0).abs() < 0.1);
    }
}
