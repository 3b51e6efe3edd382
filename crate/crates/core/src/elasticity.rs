//! Quasi-static plane-strain elasticity with phase-dependent stiffness and
//! thermal/shrinkage eigenstrain.
//!
//! Displacements live on interior nodes only (homogeneous Dirichlet data),
//! interleaved as `(ux, uy)` per node. Coefficients are evaluated at nodes,
//! interpolated linearly, and integrated exactly against the constant strains
//! of each element, which reduces to the element average of the nodal values.

use crate::error::{Error, Result};
use crate::fem::FemSpace;
use crate::linalg::{cg_solve, SolverConfig, SparseMatrix};
use crate::mesh::InteriorMap;
use crate::model::{gel_tensor_2d, MaterialLaws, ModelParams, VOIGT_WEIGHTS};

/// Assembled stiffness system over interior displacement DOFs.
#[derive(Debug, Clone)]
pub struct ElasticSystem {
    pub k: SparseMatrix,
    pub f: Vec<f64>,
    pub dof_map: InteriorMap,
}

/// Caches the interior DOF map and sparsity pattern for repeated assembly.
#[derive(Debug, Clone)]
pub struct ElasticityAssembler {
    dof_map: InteriorMap,
    pattern: SparseMatrix,
    /// Per element, the value slot of each local (row, col) pair among
    /// interior DOFs; `None` where either DOF is on the boundary.
    slots: Vec<[Option<usize>; 36]>,
}

/// Strain-displacement rows of one hat function: `(e11, e22, e12)` for unit
/// displacement in x and in y.
fn strain_rows(g: [f64; 2]) -> [[f64; 3]; 2] {
    [[g[0], 0.0, 0.5 * g[1]], [0.0, g[1], 0.5 * g[0]]]
}

impl ElasticityAssembler {
    pub fn new(space: &FemSpace) -> Result<Self> {
        let mesh = space.mesh();
        let dof_map = mesh.interior_index_map();
        let n_dofs = 2 * dof_map.len();
        let dof = |node: usize, comp: usize| dof_map.compact(node).map(|c| 2 * c + comp);

        let mut coords = Vec::new();
        let mut owners = Vec::with_capacity(mesh.n_elements());
        for el in &mesh.elements {
            let mut local = [None; 36];
            for a in 0..6 {
                for b in 0..6 {
                    if let (Some(i), Some(j)) = (dof(el[a / 2], a % 2), dof(el[b / 2], b % 2)) {
                        local[6 * a + b] = Some(coords.len());
                        coords.push((i, j));
                    }
                }
            }
            owners.push(local);
        }
        let (pattern, flat) = SparseMatrix::pattern(n_dofs, n_dofs, &coords)?;
        let slots = owners
            .into_iter()
            .map(|local| local.map(|k| k.map(|k| flat[k])))
            .collect();
        Ok(Self {
            dof_map,
            pattern,
            slots,
        })
    }

    pub fn dof_map(&self) -> &InteriorMap {
        &self.dof_map
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.dof_map.len()
    }

    /// Assemble `K` and `F` for the given phase and temperature fields.
    /// `theta0` is the reference (initial) temperature.
    pub fn assemble(
        &self,
        space: &FemSpace,
        params: &ModelParams,
        laws: &MaterialLaws,
        phi: &[f64],
        theta: &[f64],
        theta0: &[f64],
    ) -> Result<ElasticSystem> {
        let n = space.n_dofs();
        for v in [phi, theta, theta0] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        let scale: Vec<f64> = phi
            .iter()
            .map(|&p| params.stiffness_scale((laws.stiffness_ramp)(p)))
            .collect();
        let eigen: Vec<f64> = (0..n)
            .map(|i| scale[i] * ((laws.eigenstrain)(phi[i]) - params.beta * (theta[i] - theta0[i])))
            .collect();
        self.assemble_with(space, params, &scale, &eigen)
    }

    /// Assemble from nodal stiffness scale `[kappa + k(1 - kappa)]` and nodal
    /// scaled eigenstrain `scale * (m - beta (theta - theta0))`.
    pub fn assemble_with(
        &self,
        space: &FemSpace,
        params: &ModelParams,
        scale: &[f64],
        eigen: &[f64],
    ) -> Result<ElasticSystem> {
        let mesh = space.mesh();
        let c1 = gel_tensor_2d(params);
        // W C1 and W C1 I, the contraction-ready forms
        let wc: [[f64; 3]; 3] =
            std::array::from_fn(|i| std::array::from_fn(|j| VOIGT_WEIGHTS[i] * c1[i][j]));
        let wci: [f64; 3] = std::array::from_fn(|i| wc[i][0] + wc[i][1]);

        let mut k = self.pattern.clone();
        let values = k.values_mut();
        let mut f = vec![0.0; self.n_dofs()];
        for (e, el) in mesh.elements.iter().enumerate() {
            let area = space.area(e);
            let cbar = (scale[el[0]] + scale[el[1]] + scale[el[2]]) / 3.0;
            let gbar = (eigen[el[0]] + eigen[el[1]] + eigen[el[2]]) / 3.0;
            let grads = space.gradients(e);
            let rows: [[f64; 3]; 6] = std::array::from_fn(|a| strain_rows(grads[a / 2])[a % 2]);
            for a in 0..6 {
                // W C1 B_a
                let wcb: [f64; 3] =
                    std::array::from_fn(|i| (0..3).map(|j| wc[i][j] * rows[a][j]).sum());
                for b in 0..6 {
                    if let Some(slot) = self.slots[e][6 * a + b] {
                        let v: f64 = (0..3).map(|i| rows[b][i] * wcb[i]).sum();
                        values[slot] += area * cbar * v;
                    }
                }
                if let Some(c) = self.dof_map.compact(el[a / 2]) {
                    let v: f64 = (0..3).map(|i| rows[a][i] * wci[i]).sum();
                    f[2 * c + a % 2] += area * gbar * v;
                }
            }
        }
        Ok(ElasticSystem {
            k,
            f,
            dof_map: self.dof_map.clone(),
        })
    }
}

impl ElasticSystem {
    /// Add `(b, v)` for a body force given by nodal values, interpolated
    /// linearly.
    pub fn add_body_force(&mut self, space: &FemSpace, force: &[[f64; 2]]) -> Result<()> {
        if force.len() != space.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: space.n_dofs(),
                found: force.len(),
            });
        }
        for comp in 0..2 {
            let vals: Vec<f64> = force.iter().map(|b| b[comp]).collect();
            let load = space.load_from_nodal(&vals);
            for (c, &node) in self.dof_map.nodes().iter().enumerate() {
                self.f[2 * c + comp] += load[node];
            }
        }
        Ok(())
    }

    /// Solve `K U = F` and scatter to a full nodal field with zero boundary
    /// values. `guess` (a full nodal field) seeds CG.
    pub fn solve(
        &self,
        config: &SolverConfig,
        guess: Option<&[[f64; 2]]>,
    ) -> Result<Vec<[f64; 2]>> {
        let x0: Option<Vec<f64>> = guess.map(|g| self.gather(g));
        let sol = cg_solve(&self.k, &self.f, config, x0.as_deref())?;
        let mut u = vec![[0.0; 2]; self.dof_map.n_nodes()];
        for (c, &node) in self.dof_map.nodes().iter().enumerate() {
            u[node] = [sol.x[2 * c], sol.x[2 * c + 1]];
        }
        Ok(u)
    }

    /// Interior DOF vector from a full nodal field.
    pub fn gather(&self, u: &[[f64; 2]]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.dof_map.n_nodes());
        self.dof_map
            .nodes()
            .iter()
            .flat_map(|&node| u[node])
            .collect()
    }
}

/// Assemble and solve in one go, returning a field sized to the mesh.
pub fn solve_displacement(
    assembler: &ElasticityAssembler,
    space: &FemSpace,
    params: &ModelParams,
    laws: &MaterialLaws,
    phi: &[f64],
    theta: &[f64],
    theta0: &[f64],
    config: &SolverConfig,
    guess: Option<&[[f64; 2]]>,
) -> Result<Vec<[f64; 2]>> {
    let system = assembler.assemble(space, params, laws, phi, theta, theta0)?;
    system.solve(config, guess)
}
