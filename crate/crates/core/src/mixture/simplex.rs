//! Least squares over the probability simplex.
//!
//! The primary solver is an active-set method in the style of Lawson and
//! Hanson's NNLS, with the sum-to-one constraint eliminated inside each
//! passive-set subproblem. Accelerated projected gradient is kept as a
//! fallback and as a polisher. Every solution carries its Frank-Wolfe
//! duality gap, which bounds the distance to the optimal objective.

use crate::{Matrix, Scalar};

/// Euclidean projection onto `{w : wᵢ ≥ 0, Σ wᵢ = 1}` (sort-and-threshold).
pub fn project_simplex<T: Scalar>(v: &mut [T]) {
    let n = v.len();
    if n == 0 {
        return;
    }
    let mut sorted: Vec<T> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (k, &u) in sorted.iter().enumerate() {
        cumsum = cumsum + u;
        let candidate = (cumsum - T::one()) / T::from_usize_lossy(k + 1);
        if u - candidate > T::zero() {
            theta = candidate;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(T::zero());
    }
    let s: T = v.iter().copied().sum();
    if s > T::zero() {
        for x in v.iter_mut() {
            *x = *x / s;
        }
    } else {
        let u = T::one() / T::from_usize_lossy(n);
        v.iter_mut().for_each(|x| *x = u);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stop when the Frank-Wolfe duality gap is below
    /// `gap_rel · f(w) + gap_abs · ‖y‖²`.
    pub gap_rel: f64,
    pub gap_abs: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            gap_rel: 1e-9,
            gap_abs: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub weights: Vec<T>,
    pub objective: T,
    /// Frank-Wolfe gap at `weights`; an upper bound on `f(w) - f*`.
    pub gap: T,
    pub iterations: usize,
    pub converged: bool,
}

/// `min ‖y − B w‖²` subject to `w` on the simplex.
#[derive(Debug, Clone)]
pub struct SimplexLeastSquares<T> {
    design: Matrix<T>,
    target: Vec<T>,
    gram: Matrix<T>,
    cross: Vec<T>,
    target_sq: T,
    lipschitz: T,
}

impl<T: Scalar> SimplexLeastSquares<T> {
    pub fn new(design: Matrix<T>, target: Vec<T>) -> Self {
        let gram = design.transpose().outer_gram();
        let cross = design.left_mul(&target);
        let target_sq = target.iter().map(|&v| v * v).sum();
        let lipschitz = T::lit(2.0) * largest_eigenvalue(&gram);
        Self {
            design,
            target,
            gram,
            cross,
            target_sq,
            lipschitz,
        }
    }

    pub fn dim(&self) -> usize {
        self.gram.rows()
    }

    pub fn design(&self) -> &Matrix<T> {
        &self.design
    }

    /// `‖y − B w‖²` from residuals.
    pub fn objective(&self, w: &[T]) -> T {
        let fitted = self.design.mul_vec(w);
        self.target
            .iter()
            .zip(&fitted)
            .map(|(&y, &f)| (y - f) * (y - f))
            .sum()
    }

    fn gradient(&self, w: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        self.gram
            .mul_vec(w)
            .iter()
            .zip(&self.cross)
            .map(|(&a, &b)| two * (a - b))
            .collect()
    }

    pub fn duality_gap(&self, w: &[T]) -> T {
        let g = self.gradient(w);
        let inner: T = g.iter().zip(w).map(|(&a, &b)| a * b).sum();
        let min = g.iter().copied().fold(T::infinity(), T::min);
        (inner - min).max(T::zero())
    }

    /// The requested tolerances, floored at what the scalar type can resolve.
    fn tolerance(&self, f: T, opts: &SolverOptions) -> T {
        let rel = T::lit(opts.gap_rel).max(T::lit(100.0) * T::epsilon());
        let abs = T::lit(opts.gap_abs).max(T::lit(10.0) * T::epsilon());
        rel * f.max(T::zero()) + abs * self.target_sq.max(T::one())
    }

    /// FISTA with function-value restart, started from `start` (projected first).
    pub fn solve_from(&self, start: &[T], opts: &SolverOptions) -> Solution<T> {
        let n = self.dim();
        let mut x = start.to_vec();
        project_simplex(&mut x);
        if n == 1 || self.lipschitz <= T::zero() {
            return self.finish(x, 0, true);
        }
        let step = T::one() / self.lipschitz;
        let mut y = x.clone();
        let mut momentum = T::one();
        let mut fx = self.objective(&x);
        for it in 1..=opts.max_iter {
            let g = self.gradient(&y);
            let mut next: Vec<T> = y.iter().zip(&g).map(|(&yi, &gi)| yi - step * gi).collect();
            project_simplex(&mut next);
            let f_next = self.objective(&next);
            if f_next > fx {
                // restart momentum from the last iterate
                momentum = T::one();
                y.clone_from(&x);
            } else {
                let next_momentum = (T::one()
                    + (T::one() + T::lit(4.0) * momentum * momentum).sqrt())
                    / T::lit(2.0);
                let beta = (momentum - T::one()) / next_momentum;
                y = next
                    .iter()
                    .zip(&x)
                    .map(|(&a, &b)| a + beta * (a - b))
                    .collect();
                project_simplex(&mut y);
                x = next;
                fx = f_next;
                momentum = next_momentum;
            }
            if it % 10 == 0 {
                let gap = self.duality_gap(&x);
                if gap <= self.tolerance(fx, opts) {
                    return self.finish(x, it, true);
                }
            }
        }
        let gap = self.duality_gap(&x);
        let ok = gap <= self.tolerance(self.objective(&x), opts);
        self.finish(x, opts.max_iter, ok)
    }

    /// Active-set solve. Starts from the best single vertex and adds, one at
    /// a time, the component whose gradient is furthest below the equality
    /// multiplier, solving the equality-constrained subproblem on the current
    /// support and stepping back whenever a weight would turn negative.
    pub fn solve_active_set(&self, opts: &SolverOptions) -> Solution<T> {
        let n = self.dim();
        let a = &self.design;
        let vertex = (0..n)
            .map(|j| {
                let mut e = vec![T::zero(); n];
                e[j] = T::one();
                (self.objective(&e), j)
            })
            .fold(
                (T::infinity(), 0),
                |best, cur| if cur.0 < best.0 { cur } else { best },
            )
            .1;
        let mut w = vec![T::zero(); n];
        w[vertex] = T::one();
        let mut passive = vec![vertex];
        let mut iterations = 0;
        let max_outer = 20 * n + 20;
        let mut rejected = vec![false; n];
        while iterations < max_outer {
            iterations += 1;
            let g = self.gradient(&w);
            let mu: T = g.iter().zip(&w).map(|(&gi, &wi)| gi * wi).sum();
            let candidate = (0..n)
                .filter(|j| !passive.contains(j) && !rejected[*j])
                .fold(None, |best: Option<(usize, T)>, j| match best {
                    Some((_, gb)) if gb <= g[j] => best,
                    _ => Some((j, g[j])),
                });
            let f = self.objective(&w);
            let Some((t, gt)) = candidate else { break };
            if mu - gt <= self.tolerance(f, opts) {
                break;
            }
            passive.push(t);
            let mut first = true;
            loop {
                let z = match self.subproblem(a, &passive, &w) {
                    Some(z) => z,
                    None => {
                        passive.retain(|&j| j != t || w[j] > T::zero());
                        rejected[t] = true;
                        break;
                    }
                };
                let zt = passive.iter().position(|&j| j == t).map(|k| z[k]);
                if first && zt.is_some_and(|v| v <= T::zero()) {
                    // numerically the new component does not help
                    passive.retain(|&j| j != t);
                    rejected[t] = true;
                    break;
                }
                first = false;
                if z.iter().all(|&v| v > T::zero()) {
                    for (&j, &v) in passive.iter().zip(&z) {
                        w[j] = v;
                    }
                    rejected.iter_mut().for_each(|r| *r = false);
                    break;
                }
                let mut alpha = T::one();
                for (&j, &v) in passive.iter().zip(&z) {
                    if v <= T::zero() {
                        let r = w[j] / (w[j] - v);
                        if r < alpha {
                            alpha = r;
                        }
                    }
                }
                for (&j, &v) in passive.iter().zip(&z) {
                    w[j] = w[j] + alpha * (v - w[j]);
                }
                let floor = T::epsilon();
                passive.retain(|&j| {
                    if w[j] <= floor {
                        w[j] = T::zero();
                        false
                    } else {
                        true
                    }
                });
                if passive.is_empty() {
                    // cannot happen in exact arithmetic; fall back to the vertex
                    w = vec![T::zero(); n];
                    w[vertex] = T::one();
                    passive.push(vertex);
                    break;
                }
            }
        }
        let sol = self.finish(w, iterations, false);
        let converged = sol.gap <= self.tolerance(sol.objective, opts);
        Solution { converged, ..sol }
    }

    /// Minimises `‖y − A_P z‖²` subject to `Σ z = 1` over the support `P` by
    /// writing `z = e₀ + Σᵢ uᵢ (eᵢ − e₀)`, with `e₀` the currently heaviest
    /// support member. Returns `None` if the reduced problem is rank deficient.
    fn subproblem(&self, a: &Matrix<T>, passive: &[usize], w: &[T]) -> Option<Vec<T>> {
        let k = passive.len();
        if k == 1 {
            return Some(vec![T::one()]);
        }
        let pivot = (0..k).fold(0, |b, i| if w[passive[i]] > w[passive[b]] { i } else { b });
        let p0 = passive[pivot];
        let rows = a.rows();
        let others: Vec<usize> = (0..k).filter(|&i| i != pivot).collect();
        let cols: Vec<Vec<T>> = others
            .iter()
            .map(|&i| {
                (0..rows)
                    .map(|r| a.get(r, passive[i]) - a.get(r, p0))
                    .collect()
            })
            .collect();
        let rhs: Vec<T> = (0..rows).map(|r| self.target[r] - a.get(r, p0)).collect();
        let u = householder_lstsq(cols, rhs)?;
        let mut z = vec![T::zero(); k];
        let mut rest = T::one();
        for (&i, &ui) in others.iter().zip(&u) {
            z[i] = ui;
            rest = rest - ui;
        }
        z[pivot] = rest;
        Some(z)
    }

    /// Active-set solve, falling back to multi-start projected gradient from
    /// the given starts when the gap certificate is not met.
    pub fn solve(&self, starts: &[Vec<T>], opts: &SolverOptions) -> Solution<T> {
        let mut best = self.solve_active_set(opts);
        if best.converged {
            return best;
        }
        let mut all: Vec<Vec<T>> = vec![best.weights.clone()];
        all.extend(starts.iter().cloned());
        for start in &all {
            let sol = self.solve_from(start, opts);
            let better = (sol.converged && !best.converged)
                || (sol.converged == best.converged && sol.objective < best.objective);
            if better {
                best = sol;
            }
            if best.converged {
                break;
            }
        }
        best
    }

    fn finish(&self, mut w: Vec<T>, iterations: usize, converged: bool) -> Solution<T> {
        for v in w.iter_mut() {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        let s: T = w.iter().copied().sum();
        w.iter_mut().for_each(|v| *v = *v / s);
        let gap = self.duality_gap(&w);
        Solution {
            objective: self.objective(&w),
            weights: w,
            gap,
            iterations,
            converged,
        }
    }
}

/// Least squares `min ‖rhs − Σ uᵢ colsᵢ‖` by Householder QR. Returns `None`
/// when the columns are (numerically) linearly dependent.
fn householder_lstsq<T: Scalar>(mut cols: Vec<Vec<T>>, mut rhs: Vec<T>) -> Option<Vec<T>> {
    let k = cols.len();
    let m = rhs.len();
    if k > m {
        return None;
    }
    let scale = cols
        .iter()
        .map(|c| c.iter().map(|&v| v * v).sum::<T>().sqrt())
        .fold(T::zero(), T::max);
    if scale <= T::zero() {
        return None;
    }
    let tiny = T::lit(1e-11).max(T::lit(100.0) * T::epsilon()) * scale;
    let mut diag = vec![T::zero(); k];
    for j in 0..k {
        let norm = cols[j][j..].iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm <= tiny {
            return None;
        }
        let alpha = if cols[j][j] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = cols[j][j..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        diag[j] = alpha;
        if vnorm2 > T::zero() {
            let two = T::lit(2.0);
            for col in cols.iter_mut().skip(j + 1) {
                let dot: T = v.iter().zip(&col[j..]).map(|(&a, &b)| a * b).sum();
                let f = two * dot / vnorm2;
                for (c, &vi) in col[j..].iter_mut().zip(&v) {
                    *c = *c - f * vi;
                }
            }
            let dot: T = v.iter().zip(&rhs[j..]).map(|(&a, &b)| a * b).sum();
            let f = two * dot / vnorm2;
            for (c, &vi) in rhs[j..].iter_mut().zip(&v) {
                *c = *c - f * vi;
            }
        }
    }
    let mut u = vec![T::zero(); k];
    for j in (0..k).rev() {
        let mut acc = rhs[j];
        for (i, ui) in u.iter().enumerate().skip(j + 1) {
            acc = acc - cols[i][j] * *ui;
        }
        u[j] = acc / diag[j];
    }
    u.iter().all(|v| v.is_finite()).then_some(u)
}

/// Power iteration on a symmetric positive semidefinite matrix, inflated
/// slightly so that `1/L` is a safe gradient step.
fn largest_eigenvalue<T: Scalar>(m: &Matrix<T>) -> T {
    let n = m.rows();
    if n == 0 {
        return T::zero();
    }
    let mut v: Vec<T> = (0..n)
        .map(|i| T::one() + T::lit(0.01) * T::from_usize_lossy(i))
        .collect();
    let mut lambda = T::zero();
    for _ in 0..200 {
        let w = m.mul_vec(&v);
        let norm = w.iter().map(|&a| a * a).sum::<T>().sqrt();
        if norm <= T::zero() {
            return T::zero();
        }
        let next = norm / v.iter().map(|&a| a * a).sum::<T>().sqrt();
        v = w.iter().map(|&a| a / norm).collect();
        if (next - lambda).abs() <= T::lit(1e-10) * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // power iteration approaches from below
    lambda * T::lit(1.02) + T::epsilon() * m.trace()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn projection_examples() {
        let mut v = vec![0.5, 0.5];
        project_simplex(&mut v);
        assert_eq!(v, vec![0.5, 0.5]);
        let mut v = vec![2.0, 0.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0]);
        let mut v = vec![-1.0, -1.0, -1.0];
        project_simplex(&mut v);
        for x in v {
            assert_relative_eq!(x, 1.0 / 3.0);
        }
    }

    proptest! {
        #[test]
        fn projection_lands_on_simplex_and_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 1..12)) {
            let mut p = v.clone();
            project_simplex(&mut p);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            let mut again = p.clone();
            project_simplex(&mut again);
            for (a, b) in p.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recovers_interior_solution() {
        // y = B w* exactly with w* interior
        let b = Matrix::<f64>::from_rows(vec![
            vec![1.0, 0.0, 0.3],
            vec![0.0, 1.0, 0.3],
            vec![0.0, 0.0, 0.4],
        ])
        .unwrap();
        let w_true = [0.2, 0.3, 0.5];
        let y = b.mul_vec(&w_true);
        let lsq = SimplexLeastSquares::new(b, y);
        let sol = lsq.solve_from(&[1.0 / 3.0; 3], &SolverOptions::default());
        assert!(sol.converged);
        for (a, b) in sol.weights.iter().zip(&w_true) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(sol.objective < 1e-10);
    }

    #[test]
    fn active_set_recovers_interior_solution() {
        let b = Matrix::<f64>::from_rows(vec![
            vec![1.0, 0.0, 0.3],
            vec![0.0, 1.0, 0.3],
            vec![0.0, 0.0, 0.4],
        ])
        .unwrap();
        let w_true = [0.2, 0.3, 0.5];
        let y = b.mul_vec(&w_true);
        let sol = SimplexLeastSquares::new(b, y).solve_active_set(&SolverOptions::default());
        assert!(sol.converged);
        for (a, b) in sol.weights.iter().zip(&w_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn active_set_handles_boundary_and_duplicates() {
        // duplicated column and a target outside the hull
        let b = Matrix::<f64>::from_rows(vec![
            vec![1.0, 1.0, 0.0, 5.0],
            vec![0.0, 0.0, 1.0, 5.0],
            vec![2.0, 2.0, 0.5, 0.0],
        ])
        .unwrap();
        let y = vec![3.0, -1.0, 2.0];
        let lsq = SimplexLeastSquares::new(b, y);
        let sol = lsq.solve_active_set(&SolverOptions::default());
        assert!(sol.converged, "{sol:?}");
        let pg = lsq.solve_from(&[0.25; 4], &SolverOptions::default());
        assert!(sol.objective <= pg.objective + 1e-9);
    }

    #[test]
    fn lstsq_solves_square_system() {
        let u: Vec<f64> =
            householder_lstsq(vec![vec![2.0, 0.0], vec![1.0, 3.0]], vec![4.0, 6.0]).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-14 && (u[1] - 2.0).abs() < 1e-14);
        assert!(
            householder_lstsq::<f64>(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0])
                .is_none()
        );
    }

    proptest! {
        #[test]
        fn active_set_matches_projected_gradient(
            entries in prop::collection::vec(0.0f64..5.0, 24),
            target in prop::collection::vec(0.0f64..10.0, 6),
        ) {
            let rows: Vec<Vec<f64>> = entries.chunks(4).map(|c| c.to_vec()).collect();
            let lsq = SimplexLeastSquares::new(Matrix::from_rows(rows).unwrap(), target);
            let a = lsq.solve_active_set(&SolverOptions::default());
            let opts = SolverOptions { max_iter: 200_000, ..SolverOptions::default() };
            let p = lsq.solve_from(&[0.25; 4], &opts);
            prop_assert!(a.objective <= p.objective + 1e-7 * (1.0 + p.objective));
            prop_assert!((a.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(a.weights.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn never_worse_than_start() {
        let b = Matrix::<f64>::from_rows(vec![
            vec![3.0, 1.0, 0.0],
            vec![1.0, 2.0, 1.0],
            vec![0.5, 0.0, 4.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap();
        let y = vec![1.0, 5.0, 0.2, 2.0];
        let lsq = SimplexLeastSquares::new(b, y);
        let start = [1.0 / 3.0; 3];
        let sol = lsq.solve_from(&start, &SolverOptions::default());
        assert!(sol.objective <= lsq.objective(&start));
        let again = lsq.solve_from(&sol.weights, &SolverOptions::default());
        assert!((again.objective - sol.objective).abs() < 1e-10);
    }
}
