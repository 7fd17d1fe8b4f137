//! Composite Gauss-Legendre rules with cumulative (indefinite) integration.

use rug::Float;

/// Panel count for the source support.
pub const DEFAULT_PANELS: usize = 64;
/// Gauss-Legendre nodes per panel.
pub const DEFAULT_NODES_PER_PANEL: usize = 16;

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]` at `prec` bits.
pub fn gauss_legendre(n: usize, prec: u32) -> (Vec<Float>, Vec<Float>) {
    assert!(n >= 1, "need at least one node");
    let wp = prec + 32;
    let tol = Float::with_val(wp, Float::i_exp(1, -(prec as i32 + 8)));
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        // Descending initial guesses map to ascending nodes after negation.
        let guess = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = Float::with_val(wp, guess);
        let mut dp = Float::with_val(wp, 0);
        for _ in 0..200 {
            let (p, d) = legendre_with_derivative(n, &x);
            let step = Float::with_val(wp, &p / &d);
            x -= &step;
            dp = d;
            if step.abs() <= tol {
                let (_, d) = legendre_with_derivative(n, &x);
                dp = d;
                break;
            }
        }
        let one_minus = Float::with_val(wp, 1u32) - Float::with_val(wp, x.square_ref());
        let w = Float::with_val(wp, 2u32) / (one_minus * Float::with_val(wp, dp.square_ref()));
        nodes.push(Float::with_val(prec, x));
        weights.push(Float::with_val(prec, w));
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: &Float) -> (Float, Float) {
    let prec = x.prec();
    let table = legendre_table(n, x);
    let p = table[n].clone();
    let pm1 = if n >= 1 {
        table[n - 1].clone()
    } else {
        Float::with_val(prec, 0)
    };
    // (1 - x^2) P_n' = n (P_{n-1} - x P_n)
    let num = (pm1 - Float::with_val(prec, x * &p)) * n as u32;
    let den = Float::with_val(prec, 1u32) - Float::with_val(prec, x.square_ref());
    (p, num / den)
}

/// `[P_0(x), ..., P_n(x)]`.
fn legendre_table(n: usize, x: &Float) -> Vec<Float> {
    let prec = x.prec();
    let mut out = Vec::with_capacity(n + 2);
    out.push(Float::with_val(prec, 1));
    if n >= 1 {
        out.push(x.clone());
    }
    for k in 1..n {
        // (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
        let a = Float::with_val(prec, x * &out[k]) * (2 * k + 1) as u32;
        let b = Float::with_val(prec, &out[k - 1] * k as u32);
        out.push((a - b) / (k + 1) as u32);
    }
    out
}

/// `S[i][j]` with `int_{-1}^{x_i} f ~ sum_j S[i][j] f(x_j)`.
fn cumulative_matrix(nodes: &[Float], weights: &[Float], prec: u32) -> Vec<Vec<Float>> {
    let n = nodes.len();
    let tables: Vec<Vec<Float>> = nodes.iter().map(|x| legendre_table(n, x)).collect();
    let mut s = vec![vec![Float::with_val(prec, 0); n]; n];
    for i in 0..n {
        let xi = &nodes[i];
        let pi = &tables[i];
        for j in 0..n {
            let pj = &tables[j];
            let mut acc = Float::with_val(prec, xi + 1u32) / 2u32;
            for k in 1..n {
                let diff = Float::with_val(prec, &pi[k + 1] - &pi[k - 1]);
                acc += Float::with_val(prec, &pj[k] * &diff) / 2u32;
            }
            s[i][j] = acc * &weights[j];
        }
    }
    s
}

/// Equal-width Gauss-Legendre panels on `[a, b]`.
#[derive(Clone, Debug)]
pub struct PanelQuadrature {
    pub a: f64,
    pub b: f64,
    pub panels: usize,
    pub per_panel: usize,
    pub prec: u32,
    nodes: Vec<Float>,
    weights: Vec<Float>,
    half_width: Float,
    cum: Vec<Vec<Float>>,
}

impl PanelQuadrature {
    pub fn new(a: f64, b: f64, panels: usize, per_panel: usize, prec: u32) -> Self {
        assert!(
            b > a && panels >= 1 && per_panel >= 2,
            "invalid panel layout"
        );
        let (ref_nodes, ref_weights) = gauss_legendre(per_panel, prec);
        let cum = cumulative_matrix(&ref_nodes, &ref_weights, prec);
        let fa = Float::with_val(prec, a);
        let width = (Float::with_val(prec, b) - &fa) / panels as u32;
        let half_width = Float::with_val(prec, &width / 2u32);
        let mut nodes = Vec::with_capacity(panels * per_panel);
        let mut weights = Vec::with_capacity(panels * per_panel);
        for p in 0..panels {
            let left = Float::with_val(prec, &width * p as u32) + &fa;
            let mid = Float::with_val(prec, &left + &half_width);
            for (x, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(Float::with_val(prec, x * &half_width) + &mid);
                weights.push(Float::with_val(prec, w * &half_width));
            }
        }
        Self {
            a,
            b,
            panels,
            per_panel,
            prec,
            nodes,
            weights,
            half_width,
            cum,
        }
    }

    pub fn nodes(&self) -> &[Float] {
        &self.nodes
    }

    pub fn weights(&self) -> &[Float] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: &[Float]) -> Float {
        assert_eq!(f.len(), self.len());
        let mut acc = Float::with_val(self.prec, 0);
        for (w, v) in self.weights.iter().zip(f) {
            acc += Float::with_val(self.prec, w * v);
        }
        acc
    }

    fn panel_partials(&self, f: &[Float]) -> (Vec<Float>, Vec<Vec<Float>>) {
        let n = self.per_panel;
        let mut totals = Vec::with_capacity(self.panels);
        let mut partials = Vec::with_capacity(self.panels);
        for p in 0..self.panels {
            let fp = &f[p * n..(p + 1) * n];
            let wp = &self.weights[p * n..(p + 1) * n];
            let mut total = Float::with_val(self.prec, 0);
            for (w, v) in wp.iter().zip(fp) {
                total += Float::with_val(self.prec, w * v);
            }
            let mut part = Vec::with_capacity(n);
            for row in &self.cum {
                let mut acc = Float::with_val(self.prec, 0);
                for (s, v) in row.iter().zip(fp) {
                    acc += Float::with_val(self.prec, s * v);
                }
                part.push(acc * &self.half_width);
            }
            totals.push(total);
            partials.push(part);
        }
        (totals, partials)
    }

    /// `int_a^{x_i} f` at every node.
    pub fn left_cumulative(&self, f: &[Float]) -> Vec<Float> {
        assert_eq!(f.len(), self.len());
        let (totals, partials) = self.panel_partials(f);
        let mut out = Vec::with_capacity(self.len());
        let mut prefix = Float::with_val(self.prec, 0);
        for (total, part) in totals.iter().zip(partials) {
            for v in part {
                out.push(Float::with_val(self.prec, &prefix + &v));
            }
            prefix += total;
        }
        out
    }

    /// `int_{x_i}^b f` at every node, accumulated from the right.
    pub fn right_cumulative(&self, f: &[Float]) -> Vec<Float> {
        assert_eq!(f.len(), self.len());
        let (totals, partials) = self.panel_partials(f);
        let mut out = vec![Float::with_val(self.prec, 0); self.len()];
        let mut suffix = Float::with_val(self.prec, 0);
        for p in (0..self.panels).rev() {
            for (i, v) in partials[p].iter().enumerate() {
                let inside = Float::with_val(self.prec, &totals[p] - v);
                out[p * self.per_panel + i] = inside + &suffix;
            }
            suffix += &totals[p];
        }
        out
    }
}
