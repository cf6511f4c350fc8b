//! Coordinate foliations of the torus: leaves are the subtori spanned by a
//! proper subset of the grid axes, and basic functions are those constant
//! along every leaf.

use serde::{Deserialize, Serialize};

use crate::cone::Verdict;
use crate::error::{Error, Result};
use crate::functional::ProblemInstance;
use crate::grid::{Field, PeriodicGrid};
use crate::solver::{self, SolveOptions, SolveStatus};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Foliation {
    dim: usize,
    /// Zero-based axes tangent to the leaves, sorted.
    leaf_axes: Vec<usize>,
    transverse_axes: Vec<usize>,
}

impl Foliation {
    pub fn new(dim: usize, mut leaf_axes: Vec<usize>) -> Result<Self> {
        leaf_axes.sort_unstable();
        leaf_axes.dedup();
        if let Some(&a) = leaf_axes.iter().find(|&&a| a >= dim) {
            return Err(Error::InvalidArgument(format!(
                "leaf axis {a} out of range for a {dim}-dimensional grid"
            )));
        }
        if leaf_axes.len() >= dim {
            return Err(Error::InvalidArgument(
                "leaf axes must be a proper subset of the grid axes".into(),
            ));
        }
        let transverse_axes = (0..dim).filter(|a| !leaf_axes.contains(a)).collect();
        Ok(Self {
            dim,
            leaf_axes,
            transverse_axes,
        })
    }

    /// The foliation by points.
    pub fn trivial(dim: usize) -> Self {
        Self {
            dim,
            leaf_axes: Vec::new(),
            transverse_axes: (0..dim).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn leaf_axes(&self) -> &[usize] {
        &self.leaf_axes
    }

    pub fn transverse_axes(&self) -> &[usize] {
        &self.transverse_axes
    }

    fn check(&self, grid: &PeriodicGrid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "foliation of a {}-torus applied to a {}-dimensional grid",
                self.dim,
                grid.dim()
            )));
        }
        Ok(())
    }

    /// Grid of the leaf space, weighted by the leaf volume so that
    /// integrals of basic functions agree with the full grid.
    pub fn transverse_grid(&self, grid: &PeriodicGrid) -> Result<PeriodicGrid> {
        self.check(grid)?;
        let points = self.transverse_axes.iter().map(|&a| grid.points()[a]).collect();
        let lengths = self.transverse_axes.iter().map(|&a| grid.lengths()[a]).collect();
        let leaf_volume: f64 = self.leaf_axes.iter().map(|&a| grid.lengths()[a]).product();
        PeriodicGrid::new(points, lengths)?.with_fiber_volume(grid.fiber_volume() * leaf_volume)
    }

    fn transverse_node(&self, grid: &PeriodicGrid, trans: &PeriodicGrid, node: usize) -> usize {
        self.transverse_axes
            .iter()
            .zip(trans.strides())
            .map(|(&a, s)| grid.axis_index(node, a) * s)
            .sum()
    }
}

/// Projector onto basic grid functions: each node gets the mean over its leaf.
///
/// Deviations are summed relative to the value at the leaf origin, so fields
/// that are already constant along leaves are reproduced bit for bit.
pub fn leaf_average(f: &Field, fol: &Foliation) -> Result<Field> {
    let grid = f.grid();
    let trans = fol.transverse_grid(grid)?;
    let n = f.n();
    let base = restrict(f, fol)?;
    let mut sums = vec![0.0; trans.node_count() * n];
    for node in 0..grid.node_count() {
        let t = fol.transverse_node(grid, &trans, node);
        let origin = base.node(t);
        for ((s, v), o) in sums[t * n..(t + 1) * n].iter_mut().zip(f.node(node)).zip(origin) {
            *s += v - o;
        }
    }
    let leaf_nodes = (grid.node_count() / trans.node_count()) as f64;
    for (s, o) in sums.iter_mut().zip(base.data()) {
        *s = o + *s / leaf_nodes;
    }
    let mut out = Field::zeros(grid, n);
    for node in 0..grid.node_count() {
        let t = fol.transverse_node(grid, &trans, node);
        out.node_mut(node).copy_from_slice(&sums[t * n..(t + 1) * n]);
    }
    Ok(out)
}

/// `‖f - P_B f‖∞`.
pub fn basic_defect(f: &Field, fol: &Foliation) -> Result<f64> {
    Ok(f.sub(&leaf_average(f, fol)?).norm_inf())
}

/// Values on the leaf through the origin, as a field on the transverse grid.
pub fn restrict(f: &Field, fol: &Foliation) -> Result<Field> {
    let grid = f.grid();
    let trans = fol.transverse_grid(grid)?;
    let n = f.n();
    let mut data = vec![0.0; trans.node_count() * n];
    for node in 0..grid.node_count() {
        if fol.leaf_axes.iter().all(|&a| grid.axis_index(node, a) == 0) {
            let t = fol.transverse_node(grid, &trans, node);
            data[t * n..(t + 1) * n].copy_from_slice(f.node(node));
        }
    }
    Field::from_vec(&trans, n, data)
}

/// Extends a transverse field constantly along the leaves of `full`.
pub fn lift(f: &Field, full: &PeriodicGrid, fol: &Foliation) -> Result<Field> {
    let trans = fol.transverse_grid(full)?;
    if !trans.same_nodes(f.grid()) {
        return Err(Error::ShapeMismatch(
            "field does not live on the transverse grid".into(),
        ));
    }
    let n = f.n();
    let mut out = Field::zeros(full, n);
    for node in 0..full.node_count() {
        let t = fol.transverse_node(full, &trans, node);
        out.node_mut(node).copy_from_slice(f.node(t));
    }
    Ok(out)
}

/// Transverse instance for basic data. Fields whose basic defect exceeds
/// `tau_basic` are rejected.
pub fn reduce(inst: &ProblemInstance, fol: &Foliation, tau_basic: f64) -> Result<ProblemInstance> {
    let check = |f: &Field, name: String| -> Result<Field> {
        let avg = leaf_average(f, fol)?;
        let defect = f.sub(&avg).norm_inf();
        if defect > tau_basic {
            return Err(Error::NotBasicData {
                field: name,
                defect,
                tolerance: tau_basic,
            });
        }
        restrict(&avg, fol)
    };
    let coefficients = inst
        .coefficients()
        .iter()
        .enumerate()
        .map(|(j, a)| check(a, format!("a_{}", j + 1)))
        .collect::<Result<Vec<_>>>()?;
    let rhs = check(inst.rhs(), "w".into())?;
    ProblemInstance::new(
        inst.weights().clone(),
        coefficients,
        rhs,
        inst.active().tau_active,
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct ClauseReport {
    pub status: SolveStatus,
    pub residual_inf: f64,
    pub newton_iterations: usize,
}

/// Outcome of checking the four equivalent conditions on one instance:
/// (i) a full-grid solution, (ii) cone membership, (iii) a basic solution,
/// (iv) a solution of the transverse problem.
#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub leaf_axes: Vec<usize>,
    pub verdict: Verdict,
    pub margin: f64,
    pub transverse_verdict: Verdict,
    pub data_defect: f64,
    pub tau_basic: f64,
    pub full: ClauseReport,
    pub transverse: ClauseReport,
    /// Basic defect of the normalized full solution.
    pub solution_basic_defect: Option<f64>,
    /// `‖ξ_full - lift(ξ_transverse)‖∞` after normalization.
    pub cross_defect: Option<f64>,
    pub clause_i: bool,
    pub clause_ii: bool,
    pub clause_iii: bool,
    pub clause_iv: bool,
    #[serde(skip)]
    pub full_solution: Option<Field>,
    #[serde(skip)]
    pub transverse_solution: Option<Field>,
}

pub const CROSS_DEFECT_TOLERANCE: f64 = 1e-6;

/// Runs both solves and checks that the four clauses agree.
///
/// `tau_basic` defaults to ten times the residual tolerance. The defect of
/// the full solution is tested against `max(1e-8, tau_basic)`.
pub fn theorem_harness(
    inst: &ProblemInstance,
    fol: &Foliation,
    opts: &SolveOptions,
    tau_basic: Option<f64>,
) -> Result<EquivalenceReport> {
    let tol = opts.resolved_tolerance(inst);
    let tau_basic = tau_basic.unwrap_or(10.0 * tol);
    let data_defect = inst
        .coefficients()
        .iter()
        .chain(std::iter::once(inst.rhs()))
        .map(|f| basic_defect(f, fol))
        .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)))?;
    let reduced = reduce(inst, fol, tau_basic)?;

    let full = solver::solve(inst, opts, None)?;
    let mut transverse_opts = opts.clone();
    transverse_opts.tol_residual = Some(tol);
    let trans = solver::solve(&reduced, &transverse_opts, None)?;

    let verdict = full.certificate.verdict;
    let transverse_verdict = trans.certificate.verdict;
    if verdict != transverse_verdict {
        return Err(Error::InconsistencyDetected(format!(
            "cone verdict {verdict:?} on the full grid but {transverse_verdict:?} on the leaf space"
        )));
    }

    let clause = |o: &solver::SolveOutcome| ClauseReport {
        status: o.status,
        residual_inf: o.residual_inf,
        newton_iterations: o.iterations(),
    };
    let mut report = EquivalenceReport {
        leaf_axes: fol.leaf_axes().to_vec(),
        verdict,
        margin: full.certificate.margin,
        transverse_verdict,
        data_defect,
        tau_basic,
        full: clause(&full),
        transverse: clause(&trans),
        solution_basic_defect: None,
        cross_defect: None,
        clause_i: full.status == SolveStatus::Solution,
        clause_ii: verdict == Verdict::Inside,
        clause_iii: false,
        clause_iv: trans.status == SolveStatus::Solution,
        full_solution: None,
        transverse_solution: None,
    };

    match verdict {
        Verdict::Inside => {
            if !(report.clause_i && report.clause_iv) {
                return Err(Error::InconsistencyDetected(format!(
                    "certificate is Inside but the solves returned {:?} (full) and {:?} (transverse)",
                    full.status, trans.status
                )));
            }
            let defect = basic_defect(&full.xi, fol)?;
            let lifted = lift(&trans.xi, inst.grid(), fol)?;
            let cross = full.xi.sub(&lifted).norm_inf();
            report.solution_basic_defect = Some(defect);
            report.cross_defect = Some(cross);
            report.clause_iii = defect <= tau_basic.max(1e-8);
            if !report.clause_iii {
                return Err(Error::InconsistencyDetected(format!(
                    "full solution has basic defect {defect:e} above {:e}",
                    tau_basic.max(1e-8)
                )));
            }
            if cross >= CROSS_DEFECT_TOLERANCE {
                return Err(Error::InconsistencyDetected(format!(
                    "full and lifted transverse solutions differ by {cross:e}"
                )));
            }
            report.full_solution = Some(full.xi);
            report.transverse_solution = Some(trans.xi);
        }
        Verdict::Outside => {
            if full.status != SolveStatus::NoSolutionCertified
                || trans.status != SolveStatus::NoSolutionCertified
            {
                return Err(Error::InconsistencyDetected(format!(
                    "certificate is Outside but the solves returned {:?} (full) and {:?} (transverse)",
                    full.status, trans.status
                )));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::WeightSystem;
    use crate::grid;
    use proptest::prelude::*;

    fn grid2() -> PeriodicGrid {
        PeriodicGrid::with_default_lengths(vec![16, 8]).unwrap()
    }

    fn pseudo_random(g: &PeriodicGrid, n: usize, seed: u64) -> Field {
        solver::random_initial_guess(g, n, seed)
    }

    #[test]
    fn foliation_must_be_proper() {
        assert!(Foliation::new(2, vec![0, 1]).is_err());
        assert!(Foliation::new(2, vec![2]).is_err());
        let f = Foliation::new(3, vec![2, 0]).unwrap();
        assert_eq!(f.leaf_axes(), &[0, 2]);
        assert_eq!(f.transverse_axes(), &[1]);
    }

    #[test]
    fn leaf_average_examples() {
        let g = grid2();
        let fol = Foliation::new(2, vec![1]).unwrap();
        let basic = Field::scalar_from_fn(&g, |x| x[0].cos());
        assert_eq!(leaf_average(&basic, &fol).unwrap(), basic);
        let wave = Field::scalar_from_fn(&g, |x| x[1].sin());
        assert!(leaf_average(&wave, &fol).unwrap().norm_inf() < 1e-15);
        assert!((basic_defect(&wave, &fol).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(basic_defect(&basic, &fol).unwrap(), 0.0);
    }

    #[test]
    fn lift_examples() {
        let g = grid2();
        let fol = Foliation::new(2, vec![1]).unwrap();
        let t = fol.transverse_grid(&g).unwrap();
        assert_eq!(lift(&Field::zeros(&t, 2), &g, &fol).unwrap(), Field::zeros(&g, 2));
        let f = Field::scalar_from_fn(&t, |x| (2.0 * x[0]).sin() + 0.3);
        let up = lift(&f, &g, &fol).unwrap();
        assert_eq!(basic_defect(&up, &fol).unwrap(), 0.0);
        assert_eq!(restrict(&up, &fol).unwrap(), f);
        let lap_up = grid::laplacian(&up).unwrap();
        let up_lap = lift(&grid::laplacian(&f).unwrap(), &g, &fol).unwrap();
        assert_eq!(lap_up, up_lap);
    }

    #[test]
    fn reduce_examples() {
        let g = grid2();
        let fol = Foliation::new(2, vec![1]).unwrap();
        let ws = WeightSystem::new(1, vec![vec![1.0]]).unwrap();
        let inst = ProblemInstance::new(
            ws.clone(),
            vec![Field::scalar_from_fn(&g, |x| 1.0 + 0.5 * x[0].sin())],
            Field::scalar_from_fn(&g, |x| 1.0 + x[0].cos()),
            0.0,
        )
        .unwrap();
        let red = reduce(&inst, &fol, 1e-12).unwrap();
        assert_eq!(red.grid().dim(), 1);
        let (a, b) = (inst.rhs_integral()[0], red.rhs_integral()[0]);
        assert!((a - b).abs() < 1e-12 * a.abs(), "{a} vs {b}");

        let bad = ProblemInstance::new(
            ws,
            vec![Field::scalar_from_fn(&g, |x| 1.0 + 0.5 * x[1].sin())],
            Field::constant(&g, &[1.0]),
            0.0,
        )
        .unwrap();
        match reduce(&bad, &fol, 1e-12) {
            Err(Error::NotBasicData { field, defect, .. }) => {
                assert_eq!(field, "a_1");
                assert!((defect - 0.5).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn harness_on_kazdan_warner_preset() {
        let g = PeriodicGrid::with_default_lengths(vec![32, 16]).unwrap();
        let fol = Foliation::new(2, vec![1]).unwrap();
        let inst = ProblemInstance::new(
            WeightSystem::new(1, vec![vec![1.0]]).unwrap(),
            vec![Field::scalar_from_fn(&g, |x| 1.0 + 0.5 * x[0].cos())],
            Field::scalar_from_fn(&g, |x| 1.0 + 0.5 * x[0].sin()),
            0.0,
        )
        .unwrap();
        let r = theorem_harness(&inst, &fol, &SolveOptions::default(), None).unwrap();
        assert!(r.clause_i && r.clause_ii && r.clause_iii && r.clause_iv);
        assert!(r.cross_defect.unwrap() < 1e-6);

        let outside = ProblemInstance::new(
            WeightSystem::new(1, vec![vec![1.0]]).unwrap(),
            vec![Field::constant(&g, &[1.0])],
            Field::constant(&g, &[-1.0]),
            0.0,
        )
        .unwrap();
        let r = theorem_harness(&outside, &fol, &SolveOptions::default(), None).unwrap();
        assert_eq!(r.verdict, Verdict::Outside);
        assert_eq!(r.full.status, SolveStatus::NoSolutionCertified);
        assert_eq!(r.transverse.status, SolveStatus::NoSolutionCertified);
        assert!(!(r.clause_i || r.clause_ii || r.clause_iii || r.clause_iv));
    }

    #[test]
    fn trivial_foliation_degenerates_to_plain_solve() {
        let g = PeriodicGrid::with_default_lengths(vec![16, 16]).unwrap();
        let inst = ProblemInstance::new(
            WeightSystem::new(1, vec![vec![1.0]]).unwrap(),
            vec![Field::scalar_from_fn(&g, |x| 1.0 + 0.5 * x[1].cos())],
            Field::scalar_from_fn(&g, |x| 1.0 + 0.5 * (x[0] + x[1]).sin()),
            0.0,
        )
        .unwrap();
        let r = theorem_harness(&inst, &Foliation::trivial(2), &SolveOptions::default(), None)
            .unwrap();
        assert_eq!(r.solution_basic_defect, Some(0.0));
        assert_eq!(r.data_defect, 0.0);
        assert!(r.cross_defect.unwrap() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn projector_identities(seed in any::<u64>(), axes in prop::sample::subsequence(vec![0usize, 1, 2], 0..3)) {
            let g = PeriodicGrid::new(vec![8, 6, 4], vec![1.0, 2.0, 3.0]).unwrap();
            let fol = Foliation::new(3, axes).unwrap();
            let f = pseudo_random(&g, 2, seed);
            let p = leaf_average(&f, &fol).unwrap();
            prop_assert_eq!(leaf_average(&p, &fol).unwrap(), p.clone());

            let lap_then = leaf_average(&grid::laplacian(&f).unwrap(), &fol).unwrap();
            let then_lap = grid::laplacian(&p).unwrap();
            prop_assert!(lap_then.sub(&then_lap).norm_inf() < 1e-12 * f.norm_inf());

            let (a, b) = (grid::integrate(&f), grid::integrate(&p));
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-13 * (1.0 + x.abs()));
            }

            let basic = lift(&restrict(&p, &fol).unwrap(), &g, &fol).unwrap();
            let shifted = f.add(&basic);
            let d0 = basic_defect(&f, &fol).unwrap();
            let d1 = basic_defect(&shifted, &fol).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-13);
        }
    }
}
