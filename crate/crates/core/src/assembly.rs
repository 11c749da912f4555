//! Global matrices and vectors of the weak Galerkin discretization.
//!
//! `K` realises `a_w(v, χ) = (A ∇_w v, ∇_w χ) + Σ_e |e|^{-β₀} ⟨⟦v_b⟧, ⟦χ_b⟧⟩_e`
//! over all degrees of freedom; `M` is the `L²` mass matrix of the interior
//! components. Dirichlet data enter by elimination.

use std::sync::Arc;

use thiserror::Error;

use crate::linsolve::{CsrMatrix, JumpTerm, LinsolveError, PenalizedMatrix, PenalizedSolver, SolveReport, SolverSettings};
use crate::mesh::Point;
use crate::wg::{WgFunction, WgSpace};

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error("diffusion matrix is not symmetric positive definite: {0:?}")]
    InvalidCoefficient([[f64; 2]; 2]),
    #[error("penalty exponent must be at least 1, got {0}")]
    InvalidPenalty(f64),
    #[error("final time must be positive, got {0}")]
    InvalidFinalTime(f64),
    #[error(transparent)]
    Solver(#[from] LinsolveError),
    #[error("linear solver stopped after {} iterations at relative residual {:e}", .0.iterations, .0.relative_residual)]
    NotConverged(SolveReport),
}

pub type SpaceTimeField = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
pub type SpaceField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// `u_t - ∇·(A∇u) = f` in Ω, `u = g` on ∂Ω, `u(·, 0) = φ`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub diffusion: [[f64; 2]; 2],
    pub source: SpaceTimeField,
    pub boundary: SpaceTimeField,
    pub initial: SpaceField,
    pub final_time: f64,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("diffusion", &self.diffusion)
            .field("final_time", &self.final_time)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Homogeneous data: `f = 0`, `g = 0`, `φ = 0`, `A = I`.
    pub fn homogeneous(final_time: f64) -> Self {
        ProblemSpec {
            diffusion: IDENTITY,
            source: Arc::new(|_, _| 0.0),
            boundary: Arc::new(|_, _| 0.0),
            initial: Arc::new(|_| 0.0),
            final_time,
        }
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        check_diffusion(&self.diffusion)?;
        if !(self.final_time > 0.0) {
            return Err(AssemblyError::InvalidFinalTime(self.final_time));
        }
        Ok(())
    }
}

pub const IDENTITY: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

pub fn check_diffusion(a: &[[f64; 2]; 2]) -> Result<(), AssemblyError> {
    let symmetric = (a[0][1] - a[1][0]).abs() <= 1e-14 * (a[0][1].abs() + a[1][0].abs()).max(1.0);
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !symmetric || !(a[0][0] > 0.0) || !(det > 0.0) {
        return Err(AssemblyError::InvalidCoefficient(*a));
    }
    Ok(())
}

pub fn default_beta0(k: usize) -> f64 {
    (2 * k + 3) as f64
}

/// Global stiffness matrix of `a_w`.
pub fn assemble_stiffness(space: &WgSpace, diffusion: &[[f64; 2]; 2], beta0: f64) -> CsrMatrix {
    assemble_stiffness_split(space, diffusion, beta0).assemble()
}

/// Stiffness with the jump penalty kept as separate rank-one terms, one per
/// coefficient pair on each interior edge.
pub fn assemble_stiffness_split(space: &WgSpace, diffusion: &[[f64; 2]; 2], beta0: f64) -> PenalizedMatrix {
    let mut trips = Vec::new();
    for t in 0..space.mesh.n_triangles() {
        let g = &space.grads.matrices[t];
        let w = space.kits[t].weighted_gram_rt(diffusion);
        let local = g.transpose() * &w * g;
        let dofs = space.local_dofs(t);
        for (i, &gi) in dofs.iter().enumerate() {
            for (j, &gj) in dofs.iter().enumerate() {
                // average with the transpose so K is bitwise symmetric
                trips.push((gi, gj, 0.5 * (local[(i, j)] + local[(j, i)])));
            }
        }
    }
    let mut jumps = Vec::new();
    for (e, edge) in space.mesh.edges.iter().enumerate() {
        if edge.is_boundary {
            continue;
        }
        // edge mass matrix is |e| I in the orthonormal Legendre basis
        let weight = edge.length.powf(-beta0) * edge.length;
        let s0 = space.dofs.edge_side(e, 0);
        let s1 = space.dofs.edge_side(e, 1);
        jumps.extend(s0.zip(s1).map(|(a, b)| JumpTerm { a, b, weight }));
    }
    let n = space.dofs.total();
    PenalizedMatrix { regular: CsrMatrix::from_triplets(n, n, trips), jumps }
}

/// Block-diagonal mass matrix on the interior components.
pub fn assemble_mass(space: &WgSpace) -> CsrMatrix {
    let mut trips = Vec::new();
    for t in 0..space.mesh.n_triangles() {
        let gram = &space.kits[t].gram_pk;
        let r = space.dofs.interior(t);
        for (i, gi) in r.clone().enumerate() {
            for (j, gj) in r.clone().enumerate() {
                trips.push((gi, gj, 0.5 * (gram[(i, j)] + gram[(j, i)])));
            }
        }
    }
    let n = space.dofs.total();
    CsrMatrix::from_triplets(n, n, trips)
}

/// `F_i = (f, φ_i)` on interior components; edge entries are zero.
pub fn assemble_load(space: &WgSpace, f: impl Fn(Point) -> f64) -> Vec<f64> {
    LoadAssembler::new(space).assemble(f)
}

/// Quadrature points and weighted basis values cached for repeated load
/// assembly, as in a time loop.
#[derive(Debug, Clone)]
pub struct LoadAssembler {
    n_dofs: usize,
    pk_dim: usize,
    points: Vec<Point>,
    /// For each point: its element's first interior DOF.
    offsets: Vec<usize>,
    /// `pk_dim` entries `w φ_i(p)` per point.
    weighted_basis: Vec<f64>,
}

impl LoadAssembler {
    pub fn new(space: &WgSpace) -> Self {
        let pk_dim = space.dofs.n_interior / space.mesh.n_triangles().max(1);
        let mut points = Vec::new();
        let mut offsets = Vec::new();
        let mut weighted_basis = Vec::new();
        for (t, kit) in space.kits.iter().enumerate() {
            let q = &kit.quad_error;
            let start = space.dofs.interior(t).start;
            for (&p, &w) in q.points.iter().zip(&q.weights) {
                points.push(p);
                offsets.push(start);
                weighted_basis.extend(kit.pk_eval(p).into_iter().map(|phi| w * phi));
            }
        }
        LoadAssembler { n_dofs: space.dofs.total(), pk_dim, points, offsets, weighted_basis }
    }

    pub fn assemble(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        for ((&p, &start), wphi) in self.points.iter().zip(&self.offsets).zip(self.weighted_basis.chunks(self.pk_dim)) {
            let v = f(p);
            for (o, b) in out[start..start + self.pk_dim].iter_mut().zip(wphi) {
                *o += v * b;
            }
        }
        out
    }
}

/// `Q_b g` on boundary edge DOFs, zero elsewhere.
pub fn dirichlet_values(space: &WgSpace, g: impl Fn(Point) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; space.dofs.total()];
    for (e, edge) in space.mesh.edges.iter().enumerate() {
        if edge.is_boundary {
            let c = space.project_qb(e, &g);
            out[space.dofs.edge_side(e, 0)].copy_from_slice(&c);
        }
    }
    out
}

/// Stiffness and mass with the free/constrained splitting.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub stiffness: CsrMatrix,
    pub stiffness_split: PenalizedMatrix,
    pub mass: CsrMatrix,
    pub free: Vec<usize>,
    pub constrained: Vec<usize>,
}

impl SparseSystem {
    pub fn assemble(space: &WgSpace, diffusion: &[[f64; 2]; 2], beta0: f64) -> Result<Self, AssemblyError> {
        check_diffusion(diffusion)?;
        if !(beta0 >= 1.0) {
            return Err(AssemblyError::InvalidPenalty(beta0));
        }
        let stiffness_split = assemble_stiffness_split(space, diffusion, beta0);
        Ok(SparseSystem {
            stiffness: stiffness_split.assemble(),
            stiffness_split,
            mass: assemble_mass(space),
            free: space.dofs.free_dofs(),
            constrained: space.dofs.constrained_dofs(),
        })
    }
}

/// Steady problem `-∇·(A∇u) = f*`, `u = g` on ∂Ω, solved on the free DOFs
/// with the Dirichlet values lifted to the right-hand side.
pub fn solve_elliptic(
    space: &WgSpace,
    diffusion: &[[f64; 2]; 2],
    beta0: f64,
    source: impl Fn(Point) -> f64,
    boundary: impl Fn(Point) -> f64,
    solver: &SolverSettings,
) -> Result<(WgFunction, SolveReport), AssemblyError> {
    let sys = SparseSystem::assemble(space, diffusion, beta0)?;
    let load = assemble_load(space, source);
    let mut u = dirichlet_values(space, boundary);

    let k_ff = sys.stiffness_split.restrict(&sys.free);
    let k_fc = sys.stiffness.submatrix(&sys.free, &sys.constrained);
    let u_c: Vec<f64> = sys.constrained.iter().map(|&i| u[i]).collect();
    let lift = k_fc.mul_vec(&u_c);
    let rhs: Vec<f64> = sys.free.iter().zip(&lift).map(|(&i, l)| load[i] - l).collect();

    let mut x = vec![0.0; sys.free.len()];
    let report = PenalizedSolver::new(&k_ff, *solver)?.solve(&rhs, &mut x)?;
    if !report.converged {
        return Err(AssemblyError::NotConverged(report));
    }
    for (&i, v) in sys.free.iter().zip(x) {
        u[i] = v;
    }
    Ok((WgFunction { coeffs: u }, report))
}
