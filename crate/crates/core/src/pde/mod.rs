//! Reference solvers and supervised dataset generation.

pub mod darcy;
pub mod helmholtz;
pub mod kolmogorov;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::{Field, Grid2D};
use crate::random_field::{
    sample_grf_one, transform_darcy_lognormal, transform_darcy_pc, transform_helmholtz, GrfSpec,
};

pub use darcy::solve_darcy;
pub use helmholtz::{solve_helmholtz, solve_helmholtz_flux, top_edge_flux};
pub use kolmogorov::{kolmogorov_forcing, solve_kolmogorov, KolmogorovSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Helmholtz,
    DarcyPc,
    DarcyLognormal,
    Kolmogorov,
    /// Constructed input/output pairs that do not come from a PDE solver
    /// (the universality experiments); not accepted by [`generate_dataset`].
    Synthetic,
}

impl Task {
    pub const ALL: [Task; 4] = [
        Task::Helmholtz,
        Task::DarcyPc,
        Task::DarcyLognormal,
        Task::Kolmogorov,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Task::Helmholtz => "helmholtz",
            Task::DarcyPc => "darcy-pc",
            Task::DarcyLognormal => "darcy-lognormal",
            Task::Kolmogorov => "kolmogorov",
            Task::Synthetic => "synthetic",
        }
    }

    /// Grid used by the task at resolution `n`.
    pub fn grid(&self, n: usize) -> Result<Grid2D> {
        match self {
            Task::Kolmogorov => Grid2D::periodic_2pi(n),
            _ => Grid2D::unit(n),
        }
    }

    /// Whether inputs and outputs are normalized pointwise before training.
    pub fn normalizes(&self) -> bool {
        !matches!(self, Task::Kolmogorov)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task '{s}'")))
    }
}

/// Solver and task parameters; every field has a desk-scale default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskParams {
    /// Relative residual target of the Darcy conjugate-gradient solve.
    pub darcy_tol: f64,
    pub helmholtz_omega: f64,
    pub helmholtz_tol: f64,
    pub reynolds: f64,
    /// Forcing wavenumber of the Kolmogorov flow.
    pub forcing_n: usize,
    pub dt: f64,
    pub t_burn: f64,
    /// Time between input and output of one Kolmogorov pair.
    pub h: f64,
    pub pairs_per_trajectory: usize,
    /// Overrides the task's default input prior (the seed is always taken
    /// from the dataset seed).
    pub grf: Option<GrfSpec>,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            darcy_tol: 1e-8,
            helmholtz_omega: 15.0,
            helmholtz_tol: 1e-10,
            reynolds: 40.0,
            forcing_n: 4,
            dt: 0.005,
            t_burn: 20.0,
            h: 0.1,
            pairs_per_trajectory: 10,
            grf: None,
        }
    }
}

impl TaskParams {
    pub fn grf_spec(&self, task: Task, seed: u64) -> GrfSpec {
        let base = match task {
            Task::Kolmogorov => GrfSpec::periodic(seed),
            _ => GrfSpec::neumann(seed),
        };
        match self.grf {
            Some(g) => GrfSpec { seed, ..g },
            None => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub task: Task,
    pub grid: Grid2D,
    pub seed: u64,
    pub grf: GrfSpec,
    pub params: TaskParams,
    /// Group of each sample (the Kolmogorov trajectory; the sample index otherwise).
    pub groups: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Field>,
    pub outputs: Vec<Field>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(inputs: Vec<Field>, outputs: Vec<Field>, meta: DatasetMeta) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != outputs.len() || meta.groups.len() != inputs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} inputs, {} outputs, {} group labels",
                inputs.len(),
                outputs.len(),
                meta.groups.len()
            )));
        }
        let (ci, co) = (inputs[0].channels(), outputs[0].channels());
        for f in inputs.iter().chain(&outputs) {
            if !f.grid().same_points(&meta.grid) {
                return Err(Error::ShapeMismatch(
                    "dataset fields must share one grid".into(),
                ));
            }
        }
        if inputs.iter().any(|f| f.channels() != ci) || outputs.iter().any(|f| f.channels() != co) {
            return Err(Error::ShapeMismatch("inconsistent channel counts".into()));
        }
        Ok(Self {
            inputs,
            outputs,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn grid(&self) -> &Grid2D {
        &self.meta.grid
    }

    pub fn in_channels(&self) -> usize {
        self.inputs[0].channels()
    }

    pub fn out_channels(&self) -> usize {
        self.outputs[0].channels()
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let meta = DatasetMeta {
            groups: indices.iter().map(|&i| self.meta.groups[i]).collect(),
            ..self.meta.clone()
        };
        Dataset::new(
            indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            indices.iter().map(|&i| self.outputs[i].clone()).collect(),
            meta,
        )
    }

    /// Random train/test split keeping whole groups together.
    ///
    /// Groups are visited in a seeded random order and assigned to the test
    /// split until it holds at least `n_test` samples.
    pub fn split(&self, n_test: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        if n_test == 0 || n_test >= self.len() {
            return Err(Error::InvalidParameter(format!(
                "cannot hold out {n_test} of {} samples",
                self.len()
            )));
        }
        let mut groups: Vec<usize> = self.meta.groups.clone();
        groups.sort_unstable();
        groups.dedup();
        groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut test_groups = Vec::new();
        let mut count = 0;
        for g in groups {
            if count >= n_test {
                break;
            }
            count += self.meta.groups.iter().filter(|&&x| x == g).count();
            test_groups.push(g);
        }
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.len()).partition(|&i| test_groups.contains(&self.meta.groups[i]));
        if train.is_empty() {
            return Err(Error::InvalidParameter(
                "split left no training samples".into(),
            ));
        }
        Ok((self.subset(&train)?, self.subset(&test)?))
    }
}

fn solve_one(
    task: Task,
    grf: &GrfSpec,
    grid: &Grid2D,
    params: &TaskParams,
    index: u64,
) -> Result<(Field, Field)> {
    let g = sample_grf_one(grf, grid, index)?;
    match task {
        Task::Helmholtz => {
            let c = transform_helmholtz(&g);
            let u = solve_helmholtz(&c, params.helmholtz_omega, params.helmholtz_tol)?;
            Ok((c, u))
        }
        Task::DarcyPc => {
            let a = transform_darcy_pc(&g);
            let u = solve_darcy(&a, params.darcy_tol)?;
            Ok((a, u))
        }
        Task::DarcyLognormal => {
            let a = transform_darcy_lognormal(&g)?;
            let u = solve_darcy(&a, params.darcy_tol)?;
            Ok((a, u))
        }
        Task::Kolmogorov | Task::Synthetic => unreachable!("handled by generate_dataset"),
    }
}

fn kolmogorov_trajectory(
    grf: &GrfSpec,
    grid: &Grid2D,
    params: &TaskParams,
    traj: u64,
    pairs: usize,
) -> Result<Vec<(Field, Field)>> {
    let solver = KolmogorovSolver::new(*grid, params.reynolds, params.forcing_n)?;
    let w0 = sample_grf_one(grf, grid, traj)?;
    let mut state = solver.run(&w0, params.t_burn, params.dt)?;
    let mut out = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let next = solver.run(&state, params.h, params.dt)?;
        out.push((state, next.clone()));
        state = next;
    }
    Ok(out)
}

/// Generates `n` input/output pairs for `task`.
///
/// Sample `i` (Kolmogorov: trajectory `i / pairs_per_trajectory`) depends
/// only on `(seed, i)` and the parameters. Solver failures carry the index of
/// the failing sample.
pub fn generate_dataset(
    task: Task,
    grid: &Grid2D,
    n: usize,
    seed: u64,
    params: &TaskParams,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "dataset size must be at least 1".into(),
        ));
    }
    if task == Task::Synthetic {
        return Err(Error::Config(
            "synthetic datasets are built by the universality module".into(),
        ));
    }
    let grf = params.grf_spec(task, seed);
    let (pairs, groups): (Vec<(Field, Field)>, Vec<usize>) = if task == Task::Kolmogorov {
        let per = params.pairs_per_trajectory.max(1);
        let n_traj = n.div_ceil(per);
        let trajs: Vec<Vec<(Field, Field)>> = (0..n_traj)
            .into_par_iter()
            .map(|t| {
                let take = per.min(n - t * per);
                kolmogorov_trajectory(&grf, grid, params, t as u64, take)
                    .map_err(|e| e.at_sample(t * per))
            })
            .collect::<Result<_>>()?;
        let groups = trajs
            .iter()
            .enumerate()
            .flat_map(|(t, v)| std::iter::repeat_n(t, v.len()))
            .collect();
        (trajs.into_iter().flatten().collect(), groups)
    } else {
        let pairs = (0..n)
            .into_par_iter()
            .map(|i| solve_one(task, &grf, grid, params, i as u64).map_err(|e| e.at_sample(i)))
            .collect::<Result<Vec<_>>>()?;
        (pairs, (0..n).collect())
    };
    let (inputs, outputs) = pairs.into_iter().unzip();
    Dataset::new(
        inputs,
        outputs,
        DatasetMeta {
            task,
            grid: *grid,
            seed,
            grf,
            params: *params,
            groups,
        },
    )
}
