//! Continuous piecewise-linear (P1) finite elements on a [`Mesh`].
//!
//! Mass, stiffness and P1-weighted mass matrices are integrated exactly from
//! closed-form local matrices. Nonlinear coefficients are always handled
//! through their nodal interpolants, so every matrix the time stepper needs is
//! polynomial on each element.

use crate::error::{Error, Result};
use crate::linalg::{cg_solve, dot, SolverConfig, SparseMatrix};
use crate::mesh::Mesh;

/// Symmetric quadrature rule on a triangle in barycentric coordinates.
/// Weights are normalized so they sum to one (multiply by the area).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    /// Smallest built-in rule exact for polynomials of degree `order` (1..=5).
    pub fn of_order(order: usize) -> Result<Self> {
        match order {
            0 | 1 => Ok(Self {
                points: vec![[1.0 / 3.0; 3]],
                weights: vec![1.0],
                order: 1,
            }),
            2 => Ok(Self::orbit_rule(&[], &[(1.0 / 6.0, 1.0 / 3.0)], 2)),
            3 => Ok(Self::orbit_rule(&[-27.0 / 48.0], &[(0.2, 25.0 / 48.0)], 3)),
            4 => Ok(Self::orbit_rule(
                &[],
                &[
                    (0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_70),
                    (0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64),
                ],
                4,
            )),
            5 => {
                let s = 15f64.sqrt();
                Ok(Self::orbit_rule(
                    &[9.0 / 40.0],
                    &[
                        ((6.0 - s) / 21.0, (155.0 - s) / 1200.0),
                        ((6.0 + s) / 21.0, (155.0 + s) / 1200.0),
                    ],
                    5,
                ))
            }
            _ => Err(Error::InvalidInput(format!(
                "no built-in triangle rule of order {order}"
            ))),
        }
    }

    /// Optional centroid weight plus three-point orbits `(a, a, 1 - 2a)`.
    fn orbit_rule(centroid: &[f64], orbits: &[(f64, f64)], order: usize) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for &w in centroid {
            points.push([1.0 / 3.0; 3]);
            weights.push(w);
        }
        for &(a, w) in orbits {
            let b = 1.0 - 2.0 * a;
            for p in [[a, a, b], [a, b, a], [b, a, a]] {
                points.push(p);
                weights.push(w);
            }
        }
        Self {
            points,
            weights,
            order,
        }
    }
}

/// A scalar function of position. The default gradient is a fourth-order
/// central difference; implementors with a closed form should override it.
pub trait ScalarField: Sync {
    fn value(&self, p: [f64; 2]) -> f64;

    fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        const H: f64 = 1e-3;
        let d = |e: [f64; 2]| {
            let at = |s: f64| self.value([p[0] + s * e[0], p[1] + s * e[1]]);
            (8.0 * (at(H) - at(-H)) - (at(2.0 * H) - at(-2.0 * H))) / (12.0 * H)
        };
        [d([1.0, 0.0]), d([0.0, 1.0])]
    }
}

impl<F: Fn([f64; 2]) -> f64 + Sync> ScalarField for F {
    fn value(&self, p: [f64; 2]) -> f64 {
        self(p)
    }
}

/// A field with an explicit gradient.
pub struct WithGradient<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> ScalarField for WithGradient<F, G>
where
    F: Fn([f64; 2]) -> f64 + Sync,
    G: Fn([f64; 2]) -> [f64; 2] + Sync,
{
    fn value(&self, p: [f64; 2]) -> f64 {
        (self.value)(p)
    }

    fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        (self.gradient)(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
    pub linf: f64,
}

/// P1 space over a mesh with precomputed element geometry, the shared
/// sparsity pattern, and the constant-coefficient mass and stiffness
/// matrices.
#[derive(Debug, Clone)]
pub struct FemSpace {
    mesh: Mesh,
    areas: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
    pattern: SparseMatrix,
    slots: Vec<[usize; 9]>,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
}

impl FemSpace {
    pub fn new(mesh: Mesh) -> Result<Self> {
        if mesh.dim != 2 {
            return Err(Error::InvalidInput(format!(
                "{}-D assembly is not implemented",
                mesh.dim
            )));
        }
        let mut areas = Vec::with_capacity(mesh.n_elements());
        let mut grads = Vec::with_capacity(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            let [p0, p1, p2] = mesh.element_coords(e);
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            if det <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "element {e} is degenerate or clockwise"
                )));
            }
            // gradient of the hat at vertex a is the rotated opposite edge over 2A
            let g = |pb: [f64; 2], pc: [f64; 2]| [(pb[1] - pc[1]) / det, (pc[0] - pb[0]) / det];
            grads.push([g(p1, p2), g(p2, p0), g(p0, p1)]);
            areas.push(0.5 * det);
        }

        let mut coords = Vec::with_capacity(9 * mesh.n_elements());
        for el in &mesh.elements {
            for &a in el {
                for &b in el {
                    coords.push((a, b));
                }
            }
        }
        let n = mesh.n_nodes();
        let (pattern, flat) = SparseMatrix::pattern(n, n, &coords)?;
        let slots = flat
            .chunks_exact(9)
            .map(|c| {
                let mut s = [0usize; 9];
                s.copy_from_slice(c);
                s
            })
            .collect();

        let mut space = Self {
            mesh,
            areas,
            grads,
            pattern: pattern.clone(),
            slots,
            mass: pattern.clone(),
            stiffness: pattern,
        };
        space.mass = space.assemble_mass();
        space.stiffness = space.assemble_stiffness();
        Ok(space)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    /// Hat-function gradients of element `e`, one per local vertex.
    pub fn gradients(&self, e: usize) -> &[[f64; 2]; 3] {
        &self.grads[e]
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    fn assemble_local(&self, local: impl Fn(usize) -> [[f64; 3]; 3]) -> SparseMatrix {
        let mut m = self.pattern.clone();
        let values = m.values_mut();
        for (e, slots) in self.slots.iter().enumerate() {
            let k = local(e);
            for a in 0..3 {
                for b in 0..3 {
                    values[slots[3 * a + b]] += k[a][b];
                }
            }
        }
        m
    }

    /// Consistent mass matrix `M_ij = (chi_i, chi_j)`.
    pub fn assemble_mass(&self) -> SparseMatrix {
        self.assemble_local(|e| {
            let c = self.areas[e] / 12.0;
            let mut k = [[c; 3]; 3];
            (0..3).for_each(|a| k[a][a] = 2.0 * c);
            k
        })
    }

    /// Stiffness matrix `S_ij = (grad chi_i, grad chi_j)`.
    pub fn assemble_stiffness(&self) -> SparseMatrix {
        self.assemble_local(|e| {
            let g = &self.grads[e];
            let mut k = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    k[a][b] = self.areas[e] * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
            k
        })
    }

    /// `P_ij = (I_h(w) chi_i, chi_j)` for nodal weights `w`, integrated exactly.
    pub fn assemble_weighted_mass(&self, w: &[f64]) -> Result<SparseMatrix> {
        self.check_len(w)?;
        Ok(self.assemble_local(|e| {
            let el = self.mesh.elements[e];
            let wl = [w[el[0]], w[el[1]], w[el[2]]];
            let sum: f64 = wl.iter().sum();
            let area = self.areas[e];
            let mut k = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    // int l_a l_b l_c / A = 1/10 (a=b=c), 1/30 (two equal), 1/60 (distinct)
                    k[a][b] = if a == b {
                        area * (wl[a] / 10.0 + (sum - wl[a]) / 30.0)
                    } else {
                        area * ((wl[a] + wl[b]) / 30.0 + (sum - wl[a] - wl[b]) / 60.0)
                    };
                }
            }
            k
        }))
    }

    pub fn nodal_interpolate(&self, f: &dyn ScalarField) -> Vec<f64> {
        self.mesh.nodes.iter().map(|&p| f.value(p)).collect()
    }

    /// Load vector `(I_h f, chi_k)`, i.e. `M` times the nodal values of `f`.
    pub fn load_from_function(&self, f: &dyn ScalarField) -> Vec<f64> {
        self.load_from_nodal(&self.nodal_interpolate(f))
    }

    pub fn load_from_nodal(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs()];
        self.mass.spmv_into(values, &mut out);
        out
    }

    /// `int_Omega f` by element quadrature.
    pub fn integrate(&self, f: &dyn ScalarField, rule: &QuadratureRule) -> f64 {
        let mut total = 0.0;
        for e in 0..self.mesh.n_elements() {
            let [p0, p1, p2] = self.mesh.element_coords(e);
            let mut acc = 0.0;
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                let x = l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0];
                let y = l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1];
                acc += w * f.value([x, y]);
            }
            total += self.areas[e] * acc;
        }
        total
    }

    /// `int_Omega g(I_h v)` for a pointwise map `g` of the P1 interpolant of `v`.
    pub fn integrate_composed(
        &self,
        v: &[f64],
        g: impl Fn(f64) -> f64,
        rule: &QuadratureRule,
    ) -> f64 {
        let mut total = 0.0;
        for (e, el) in self.mesh.elements.iter().enumerate() {
            let mut acc = 0.0;
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                acc += w * g(l[0] * v[el[0]] + l[1] * v[el[1]] + l[2] * v[el[2]]);
            }
            total += self.areas[e] * acc;
        }
        total
    }

    /// Ritz projection: `(grad(f - R_h f), grad chi) = 0` for every hat
    /// function, with `int R_h f = int f`.
    ///
    /// The Neumann system is singular; its right-hand side is projected onto
    /// the range of `S` (zero sum), solved, and the mean of `f` restored.
    pub fn ritz_project(&self, f: &dyn ScalarField, config: &SolverConfig) -> Result<Vec<f64>> {
        let rule = QuadratureRule::of_order(4)?;
        let mut rhs = vec![0.0; self.n_dofs()];
        for (e, el) in self.mesh.elements.iter().enumerate() {
            let [p0, p1, p2] = self.mesh.element_coords(e);
            let mut gbar = [0.0; 2];
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                let x = l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0];
                let y = l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1];
                let g = f.gradient([x, y]);
                gbar[0] += w * g[0];
                gbar[1] += w * g[1];
            }
            for (a, &node) in el.iter().enumerate() {
                let ga = self.grads[e][a];
                rhs[node] += self.areas[e] * (gbar[0] * ga[0] + gbar[1] * ga[1]);
            }
        }
        let shift = rhs.iter().sum::<f64>() / rhs.len() as f64;
        rhs.iter_mut().for_each(|r| *r -= shift);

        let mut x = cg_solve(&self.stiffness, &rhs, config, None)?.x;
        let target = self.integrate(f, &rule);
        let ones = vec![1.0; self.n_dofs()];
        let current = dot(&ones, &self.load_from_nodal(&x));
        // the domain measure is one
        let area: f64 = self.areas.iter().sum();
        let correction = (target - current) / area;
        x.iter_mut().for_each(|v| *v += correction);
        Ok(x)
    }

    /// Discrete Neumann Laplacian: solves `M y = -S f`.
    pub fn discrete_laplacian(&self, f: &[f64], config: &SolverConfig) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let mut rhs = self.stiffness.spmv(f)?;
        rhs.iter_mut().for_each(|v| *v = -*v);
        Ok(cg_solve(&self.mass, &rhs, config, None)?.x)
    }

    /// `sqrt(f^T M f)`, `sqrt(f^T S f)` and the nodal max.
    pub fn norms(&self, f: &[f64]) -> Norms {
        Norms {
            l2: self.l2_norm_sq(f).max(0.0).sqrt(),
            h1_semi: self.h1_semi_sq(f).max(0.0).sqrt(),
            linf: f.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        }
    }

    pub fn l2_norm_sq(&self, f: &[f64]) -> f64 {
        quadratic_form(&self.mass, f)
    }

    pub fn h1_semi_sq(&self, f: &[f64]) -> f64 {
        quadratic_form(&self.stiffness, f)
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_dofs(),
                found: v.len(),
            });
        }
        Ok(())
    }
}

pub fn quadratic_form(a: &SparseMatrix, x: &[f64]) -> f64 {
    let mut ax = vec![0.0; a.n_rows()];
    a.spmv_into(x, &mut ax);
    dot(x, &ax)
}

/// Least-squares slope of `log(err)` against `log(param)`.
pub fn fitted_order(params: &[f64], errors: &[f64]) -> f64 {
    let n = params.len() as f64;
    let xs: Vec<f64> = params.iter().map(|p| p.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn space(n: usize) -> FemSpace {
        FemSpace::new(Mesh::build_uniform(n).unwrap()).unwrap()
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn quadrature_exactness() {
        for order in 1..=5 {
            let rule = QuadratureRule::of_order(order).unwrap();
            assert_abs_diff_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            for a in 0..=order as u32 {
                for b in 0..=(order as u32 - a) {
                    let c = order as u32 - a - b;
                    // mean of l1^a l2^b l3^c over the triangle
                    let exact =
                        2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(l, w)| {
                            w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32)
                        })
                        .sum();
                    assert_abs_diff_eq!(q, exact, epsilon = 1e-14);
                }
            }
        }
        assert!(QuadratureRule::of_order(6).is_err());
    }

    #[test]
    fn hat_gradients_sum_to_zero() {
        let s = space(5);
        for e in 0..s.mesh().n_elements() {
            let g = s.gradients(e);
            assert_abs_diff_eq!(g[0][0] + g[1][0] + g[2][0], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(g[0][1] + g[1][1] + g[2][1], 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn local_mass_matrix() {
        let s = space(1);
        let m = s.mass().to_dense();
        // node 1 (1,0) belongs only to element 0 of area 1/2
        assert_abs_diff_eq!(m[1][1], 0.5 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[1][0], 0.5 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[1][2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn mass_integrates_one() {
        let s = space(6);
        let ones = vec![1.0; s.n_dofs()];
        assert_abs_diff_eq!(quadratic_form(s.mass(), &ones), 1.0, epsilon = 1e-12);
        assert!(s.mass().asymmetry() <= 1e-14);
    }

    #[test]
    fn mass_smallest_ritz_value_positive() {
        // Lanczos on M: tridiagonal T_k eigenvalues bracket the spectrum.
        let s = space(4);
        let n = s.n_dofs();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nv = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let mut v_prev = vec![0.0; n];
        let mut beta = 0.0;
        let (mut alphas, mut betas) = (vec![], vec![]);
        let steps = n.min(50);
        for _ in 0..steps {
            let mut w = s.mass().spmv(&v).unwrap();
            let alpha = dot(&w, &v);
            for k in 0..n {
                w[k] -= alpha * v[k] + beta * v_prev[k];
            }
            alphas.push(alpha);
            beta = dot(&w, &w).sqrt();
            if beta < 1e-14 {
                break;
            }
            betas.push(beta);
            v_prev = std::mem::replace(&mut v, w.iter().map(|x| x / beta).collect());
        }
        let k = alphas.len();
        let mut t = nalgebra::DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let min = t.symmetric_eigenvalues().min();
        assert!(min > 0.0, "smallest Ritz value {min}");
    }

    #[test]
    fn stiffness_properties() {
        let s = space(8);
        let ones = vec![1.0; s.n_dofs()];
        let r = s.stiffness().spmv(&ones).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-12));
        assert!(s.stiffness().asymmetry() <= 1e-14);
        let interior = s.mesh().interior_index_map();
        for &k in interior.nodes() {
            assert_abs_diff_eq!(s.stiffness().get(k, k), 4.0, epsilon = 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x: Vec<f64> = (0..s.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(quadratic_form(s.stiffness(), &x) >= 0.0);
        }
    }

    #[test]
    fn weighted_mass_special_weights() {
        let s = space(5);
        let ones = vec![1.0; s.n_dofs()];
        let p1 = s.assemble_weighted_mass(&ones).unwrap();
        for (a, b) in p1.values().iter().zip(s.mass().values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        let half = vec![-0.5; s.n_dofs()];
        let ph = s.assemble_weighted_mass(&half).unwrap();
        for (a, b) in ph.values().iter().zip(s.mass().values()) {
            assert_abs_diff_eq!(*a, -0.5 * b, epsilon = 1e-14);
        }
        assert!(s.assemble_weighted_mass(&[1.0]).is_err());
    }

    #[test]
    fn weighted_mass_matches_high_order_quadrature() {
        let s = space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w: Vec<f64> = (0..s.n_dofs()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let p = s.assemble_weighted_mass(&w).unwrap();
        assert!(p.asymmetry() <= 1e-14);

        let rule = QuadratureRule::of_order(5).unwrap();
        let n = s.n_dofs();
        let mut oracle = vec![vec![0.0; n]; n];
        for (e, el) in s.mesh().elements.iter().enumerate() {
            for (l, qw) in rule.points.iter().zip(&rule.weights) {
                let wv: f64 = (0..3).map(|c| l[c] * w[el[c]]).sum();
                for a in 0..3 {
                    for b in 0..3 {
                        oracle[el[a]][el[b]] += s.area(e) * qw * wv * l[a] * l[b];
                    }
                }
            }
        }
        let dense = p.to_dense();
        for i in 0..n {
            for j in 0..n {
                assert_abs_diff_eq!(dense[i][j], oracle[i][j], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn interpolation_basics() {
        let s = space(4);
        assert!(s
            .nodal_interpolate(&|_: [f64; 2]| 2.5)
            .iter()
            .all(|&v| v == 2.5));
        let lin = |p: [f64; 2]| 1.0 + 2.0 * p[0] - 3.0 * p[1];
        for (v, p) in s.nodal_interpolate(&lin).iter().zip(&s.mesh().nodes) {
            assert_eq!(*v, lin(*p));
        }
        let bounded = |p: [f64; 2]| (7.0 * p[0]).sin() * (3.0 * p[1]).cos();
        assert!(s
            .nodal_interpolate(&bounded)
            .iter()
            .all(|v| (-1.0..=1.0).contains(v)));
    }

    fn cosine_field() -> impl ScalarField {
        WithGradient {
            value: |p: [f64; 2]| (2.0 * PI * p[0]).cos() * (PI * p[1]).cos(),
            gradient: |p: [f64; 2]| {
                [
                    -2.0 * PI * (2.0 * PI * p[0]).sin() * (PI * p[1]).cos(),
                    -PI * (2.0 * PI * p[0]).cos() * (PI * p[1]).sin(),
                ]
            },
        }
    }

    /// L2 error of a nodal vector against an exact field, by order-5 quadrature.
    fn l2_error(s: &FemSpace, v: &[f64], f: &dyn ScalarField) -> f64 {
        let rule = QuadratureRule::of_order(5).unwrap();
        let mut acc = 0.0;
        for (e, el) in s.mesh().elements.iter().enumerate() {
            let [p0, p1, p2] = s.mesh().element_coords(e);
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                let x = [
                    l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0],
                    l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1],
                ];
                let vh: f64 = (0..3).map(|c| l[c] * v[el[c]]).sum();
                acc += s.area(e) * w * (vh - f.value(x)).powi(2);
            }
        }
        acc.sqrt()
    }

    #[test]
    fn ritz_projection_reproduces_linears_and_converges() {
        let cfg = SolverConfig::default().with_tolerance(1e-12);
        let s = space(4);
        let c = s.ritz_project(&|_: [f64; 2]| 3.0, &cfg).unwrap();
        assert!(c.iter().all(|v| (v - 3.0).abs() < 1e-10));
        let lin = |p: [f64; 2]| 0.5 - p[0] + 2.0 * p[1];
        let r = s.ritz_project(&lin, &cfg).unwrap();
        for (v, p) in r.iter().zip(&s.mesh().nodes) {
            assert_abs_diff_eq!(*v, lin(*p), epsilon = 1e-8);
        }

        let f = cosine_field();
        let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let s = space(n);
                let r = s.ritz_project(&f, &cfg).unwrap();
                l2_error(&s, &r, &f)
            })
            .collect();
        let order = fitted_order(&hs, &errs);
        assert!(order >= 1.8, "Ritz L2 order {order}, errors {errs:?}");
    }

    #[test]
    fn interpolation_error_is_second_order() {
        let f = cosine_field();
        let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let s = space(n);
                l2_error(&s, &s.nodal_interpolate(&f), &f)
            })
            .collect();
        assert!(fitted_order(&hs, &errs) >= 1.8);
    }

    #[test]
    fn discrete_laplacian_properties() {
        let cfg = SolverConfig::default().with_tolerance(1e-12);
        let s = space(6);
        let n = s.n_dofs();
        let z = s.discrete_laplacian(&vec![1.3; n], &cfg).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));

        let bump = s.nodal_interpolate(&|p: [f64; 2]| p[0] * p[0]);
        let lap = s.discrete_laplacian(&bump, &cfg).unwrap();
        // (Delta_h f, 1) = -(grad f, grad 1) = 0
        assert_abs_diff_eq!(
            dot(&s.load_from_nodal(&lap), &vec![1.0; n]),
            0.0,
            epsilon = 1e-10
        );

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lap = s.discrete_laplacian(&f, &cfg).unwrap();
        let sf = s.stiffness().spmv(&f).unwrap();
        let ml = s.mass().spmv(&lap).unwrap();
        let res: f64 = ml
            .iter()
            .zip(&sf)
            .map(|(a, b)| (a + b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-10 * dot(&sf, &sf).sqrt());
    }

    #[test]
    fn norms_examples() {
        let s = space(4);
        let n = s.norms(&vec![1.0; s.n_dofs()]);
        assert_abs_diff_eq!(n.l2, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.h1_semi, 0.0, epsilon = 1e-7);
        let z = s.norms(&vec![0.0; s.n_dofs()]);
        assert_eq!((z.l2, z.h1_semi, z.linf), (0.0, 0.0, 0.0));

        let s = space(64);
        let v = s.nodal_interpolate(&|p: [f64; 2]| (PI * p[0]).sin());
        let l2 = s.norms(&v).l2;
        assert!((l2 - 0.5f64.sqrt()).abs() / 0.5f64.sqrt() < 0.02, "{l2}");
    }

    #[test]
    fn load_vectors() {
        let s = space(4);
        let n = s.n_dofs();
        assert!(s
            .load_from_function(&|_: [f64; 2]| 0.0)
            .iter()
            .all(|&v| v == 0.0));
        let l = s.load_from_function(&|_: [f64; 2]| 1.0);
        assert_abs_diff_eq!(l.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let k = s.mesh().interior_index_map().node(4);
        let target = s.mesh().nodes[k];
        let indicator = move |p: [f64; 2]| if p == target { 1.0 } else { 0.0 };
        let l = s.load_from_function(&indicator);
        for i in 0..n {
            assert_eq!(l[i], s.mass().get(i, k));
        }
    }

    #[test]
    fn integrate_composed_is_exact_for_quartic_of_linear() {
        let s = space(3);
        let v = s.nodal_interpolate(&|p: [f64; 2]| 2.0 * p[0] - p[1]);
        let rule4 = QuadratureRule::of_order(4).unwrap();
        let rule5 = QuadratureRule::of_order(5).unwrap();
        let w = |x: f64| 0.25 * (x * x - 1.0).powi(2);
        let a = s.integrate_composed(&v, w, &rule4);
        let b = s.integrate_composed(&v, w, &rule5);
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
    }

    #[test]
    fn fitted_order_recovers_slope() {
        let hs = [0.1, 0.05, 0.025];
        let errs: Vec<f64> = hs.iter().map(|h: &f64| 3.0 * h.powi(2)).collect();
        assert_abs_diff_eq!(fitted_order(&hs, &errs), 2.0, epsilon = 1e-12);
    }
}
