use nalgebra::DVector;

use super::linalg::lagrange_weights;
use super::quadrature::gauss_legendre;
use super::NumericsError;
use crate::C64;

/// One-sided approach to a point: `Left` means from below (x⁻), `Right` from above (x⁺).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Affine map `y = scale·x + shift` restricted to `x ∈ [lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub lo: f64,
    pub hi: f64,
    pub scale: f64,
    pub shift: f64,
}

impl AffineMap {
    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.shift
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub start: usize,
}

/// Recipe for a composite grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Points that must be panel boundaries, in addition to -1, -1/2, 0, 1/2, 1.
    pub breakpoints: Vec<f64>,
    pub max_width: f64,
    pub order: usize,
    /// Breakpoint sets are closed under these maps.
    pub maps: Vec<AffineMap>,
    /// Points toward which panels are graded geometrically.
    pub graded: Vec<f64>,
    pub grading_levels: usize,
}

impl GridSpec {
    pub fn uniform(max_width: f64, order: usize) -> Self {
        GridSpec {
            breakpoints: Vec::new(),
            max_width,
            order,
            maps: Vec::new(),
            graded: Vec::new(),
            grading_levels: 0,
        }
    }

    pub fn refined(&self) -> Self {
        GridSpec { max_width: self.max_width / 2.0, ..self.clone() }
    }
}

/// Composite Gauss–Legendre grid on [-1, 1].
#[derive(Debug, Clone)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: Vec<Panel>,
    order: usize,
    ref_nodes: Vec<f64>,
    ref_cumulative: Vec<Vec<f64>>,
    spec: GridSpec,
}

const MERGE_TOL: f64 = 1e-12;
const MAX_BREAKPOINTS: usize = 100_000;

fn merge_sorted(points: &mut Vec<f64>) {
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup_by(|x, y| (*x - *y).abs() <= MERGE_TOL);
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Grid, NumericsError> {
        if spec.order < 2 {
            return Err(NumericsError::InvalidGrid("panel order must be at least 2".into()));
        }
        if !(spec.max_width > 0.0) {
            return Err(NumericsError::InvalidGrid("max panel width must be positive".into()));
        }
        let mut bps: Vec<f64> = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
        for &p in spec.breakpoints.iter().chain(&spec.graded) {
            if !(-1.0 - MERGE_TOL..=1.0 + MERGE_TOL).contains(&p) {
                return Err(NumericsError::InvalidGrid(format!("breakpoint {p} outside [-1, 1]")));
            }
            bps.push(p.clamp(-1.0, 1.0));
        }
        for &g in &spec.graded {
            let mut d = spec.max_width;
            for _ in 0..spec.grading_levels {
                d *= 0.5;
                for q in [g - d, g + d] {
                    if (-1.0..=1.0).contains(&q) {
                        bps.push(q);
                    }
                }
            }
        }
        merge_sorted(&mut bps);
        let mut fine = Vec::with_capacity(bps.len() * 2);
        for w in bps.windows(2) {
            let len = w[1] - w[0];
            let k = (len / spec.max_width - 1e-9).ceil().max(1.0) as usize;
            for i in 0..k {
                fine.push(w[0] + len * i as f64 / k as f64);
            }
        }
        fine.push(1.0);
        let mut bps = fine;
        for _ in 0..64 {
            let before = bps.len();
            let mut added = Vec::new();
            for m in &spec.maps {
                for &x in &bps {
                    if x >= m.lo - MERGE_TOL && x <= m.hi + MERGE_TOL {
                        let y = m.apply(x);
                        if (-1.0..=1.0).contains(&y) {
                            added.push(y);
                        }
                    }
                }
            }
            bps.extend(added);
            merge_sorted(&mut bps);
            if bps.len() > MAX_BREAKPOINTS {
                return Err(NumericsError::InvalidGrid("breakpoint closure does not terminate".into()));
            }
            if bps.len() == before {
                break;
            }
        }
        bps[0] = -1.0;
        *bps.last_mut().unwrap() = 1.0;

        let (rx, rw) = gauss_legendre(spec.order);
        let mut nodes = Vec::with_capacity(bps.len() * spec.order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        let mut panels = Vec::with_capacity(bps.len());
        for w in bps.windows(2) {
            let (a, b) = (w[0], w[1]);
            panels.push(Panel { a, b, start: nodes.len() });
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            for (x, wt) in rx.iter().zip(&rw) {
                nodes.push(c + h * x);
                weights.push(h * wt);
            }
        }
        let ref_cumulative = rx
            .iter()
            .map(|&xi| {
                let c = 0.5 * (xi - 1.0);
                let h = 0.5 * (xi + 1.0);
                let mut row = vec![0.0; rx.len()];
                for (s, ws) in rx.iter().zip(&rw) {
                    let l = lagrange_weights(&rx, c + h * s);
                    for (r, lj) in row.iter_mut().zip(&l) {
                        *r += h * ws * lj;
                    }
                }
                row
            })
            .collect();
        Ok(Grid { nodes, weights, panels, order: spec.order, ref_nodes: rx, ref_cumulative, spec })
    }

    /// Grid with roughly `n_target` nodes, panels of `order` points and the given required breakpoints.
    pub fn with_nodes(n_target: usize, order: usize, breakpoints: &[f64], maps: &[AffineMap]) -> Result<Grid, NumericsError> {
        let panels = (n_target as f64 / order as f64).max(4.0);
        let mut width = 2.0;
        while 2.0 / width < panels - 1e-9 {
            width *= 0.5;
        }
        Grid::new(GridSpec {
            breakpoints: breakpoints.to_vec(),
            max_width: width,
            order,
            maps: maps.to_vec(),
            graded: Vec::new(),
            grading_levels: 0,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn refine(&self) -> Result<Grid, NumericsError> {
        Grid::new(self.spec.refined())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.panels.iter().map(|p| p.a).collect();
        v.push(1.0);
        v
    }

    pub fn sample<F: Fn(f64) -> C64>(&self, f: F) -> DVector<C64> {
        DVector::from_iterator(self.len(), self.nodes.iter().map(|&x| f(x)))
    }

    pub fn sample_real<F: Fn(f64) -> f64>(&self, f: F) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.nodes.iter().map(|&x| f(x)))
    }

    /// Quadrature sum Σ wᵢ vᵢ.
    pub fn integrate(&self, values: &[C64]) -> C64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * *w).sum()
    }

    /// Index of the panel containing `x`; at a panel boundary `side` selects the panel.
    pub fn locate(&self, x: f64, side: Side) -> usize {
        let idx = self.panels.partition_point(|p| p.b < x || (side == Side::Right && p.b <= x && p.b < 1.0));
        idx.min(self.panels.len() - 1)
    }

    /// Barycentric interpolation weights of panel `k` evaluated at `x`.
    pub fn panel_weights(&self, k: usize, x: f64) -> Vec<f64> {
        let p = self.panels[k];
        let s = (2.0 * x - p.a - p.b) / (p.b - p.a);
        lagrange_weights(&self.ref_nodes, s)
    }

    /// Polynomial interpolant of the panel adjacent to `x` on `side`, evaluated at `x`.
    /// At the endpoints of a panel this is the extrapolated one-sided trace.
    pub fn eval(&self, values: &[C64], x: f64, side: Side) -> C64 {
        let k = self.locate(x, side);
        let p = self.panels[k];
        self.panel_weights(k, x)
            .iter()
            .enumerate()
            .map(|(j, l)| values[p.start + j] * *l)
            .sum()
    }

    /// One-sided trace at a panel boundary.
    pub fn trace(&self, values: &[C64], x: f64, side: Side) -> C64 {
        self.eval(values, x, side)
    }

    /// Running integral ∫₋₁^{xᵢ} v at every node.
    pub fn cumulative(&self, values: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        let mut base = C64::new(0.0, 0.0);
        for p in &self.panels {
            let h = 0.5 * (p.b - p.a);
            for i in 0..self.order {
                let s: C64 = (0..self.order).map(|j| values[p.start + j] * self.ref_cumulative[i][j]).sum();
                out[p.start + i] = base + s * h;
            }
            let total: C64 = (0..self.order).map(|j| values[p.start + j] * self.weights[p.start + j]).sum();
            base += total;
        }
        out
    }

    /// Integral over the whole interval of the panels ending at or before `x`, plus the partial panel.
    pub fn integral_to(&self, values: &[C64], x: f64) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (k, p) in self.panels.iter().enumerate() {
            if p.b <= x {
                s += (0..self.order).map(|j| values[p.start + j] * self.weights[p.start + j]).sum::<C64>();
            } else if p.a < x {
                let h = 0.5 * (x - p.a);
                let c = 0.5 * (x + p.a);
                for (rx, rw) in self.ref_nodes.iter().zip(gauss_legendre(self.order).1) {
                    let l = self.panel_weights(k, c + h * rx);
                    let v: C64 = l.iter().enumerate().map(|(j, lj)| values[p.start + j] * *lj).sum();
                    s += v * (h * rw);
                }
            }
        }
        s
    }
}
