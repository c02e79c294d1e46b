//! K-fold cross-validation of penalty parameters on held-out likelihood.
//!
//! For each fold, grid points are fitted in order of decreasing total penalty,
//! each warm-started from the previous solution. The held-out criterion is
//! `(1/n_k)` times the joint negative log-likelihood of the fold.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::OrdinalDataset;
use crate::error::{MtclmError, Result};
use crate::model::{fit_method, FitSettings, FittedModel, Method};
use crate::params::PenaltyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    L1,
    L1Fused,
    L1Group,
    /// Single-lambda grid for the baselines, carried in `lambda11`.
    Baseline,
}

impl GridKind {
    pub fn for_method(method: Method) -> Self {
        match method {
            Method::MtclmL1 => GridKind::L1,
            Method::MtclmFused => GridKind::L1Fused,
            Method::MtclmGroup => GridKind::L1Group,
            Method::LogisticL1 | Method::ClmL1 => GridKind::Baseline,
        }
    }
}

/// `lambda11 in {0.01, 0.05}`, `lambda12 in {0.05, 0.1}`, structural lambda in
/// `{0, 0.01, 0.05}`; baselines use `{0.01, 0.05, 0.1}`.
pub fn default_grid(kind: GridKind) -> Vec<PenaltyConfig> {
    if kind == GridKind::Baseline {
        return [0.01, 0.05, 0.1]
            .iter()
            .map(|&l| PenaltyConfig::l1(l, 0.0))
            .collect();
    }
    let structural: &[f64] = match kind {
        GridKind::L1 => &[0.0],
        _ => &[0.0, 0.01, 0.05],
    };
    let mut grid = Vec::new();
    for &l11 in &[0.01, 0.05] {
        for &l12 in &[0.05, 0.1] {
            for &s in structural {
                grid.push(match kind {
                    GridKind::L1Group => PenaltyConfig::group(l11, l12, s),
                    _ => PenaltyConfig::fused(l11, l12, s),
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSpec {
    pub folds: usize,
    pub grid: Vec<PenaltyConfig>,
    pub seed: u64,
    /// Balance every response level across folds.
    pub stratified: bool,
}

impl CvSpec {
    pub fn new(grid: Vec<PenaltyConfig>, seed: u64) -> Self {
        Self {
            folds: 5,
            grid,
            seed,
            stratified: true,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.folds < 2 {
            return Err(MtclmError::InvalidConfig(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.folds > n {
            return Err(MtclmError::InvalidConfig(format!(
                "{} folds requested for {n} observations",
                self.folds
            )));
        }
        if self.grid.is_empty() {
            return Err(MtclmError::InvalidConfig("empty penalty grid".into()));
        }
        self.grid.iter().try_for_each(PenaltyConfig::validate)
    }
}

/// Fold index of every observation. Stratified assignment shuffles each level
/// and deals its members round-robin, continuing the count across levels.
pub fn assign_folds(y: &[usize], folds: usize, seed: u64, stratified: bool) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; y.len()];
    let groups: Vec<Vec<usize>> = if stratified {
        let levels = y.iter().copied().max().map_or(0, |m| m + 1);
        (0..levels)
            .map(|l| (0..y.len()).filter(|&i| y[i] == l).collect())
            .collect()
    } else {
        vec![(0..y.len()).collect()]
    };
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            out[i] = next % folds;
            next += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub method: Method,
    pub grid: Vec<PenaltyConfig>,
    /// `fold_errors[g][k]`: held-out error of grid point `g` on fold `k`.
    pub fold_errors: Vec<Vec<f64>>,
    pub mean_errors: Vec<f64>,
    pub selected_index: usize,
    pub selected: PenaltyConfig,
    pub fold_assignment: Vec<usize>,
    /// Folds whose training part has no observations at some severity level.
    /// They are fitted anyway; the likelihood stays well defined.
    pub folds_missing_levels: Vec<usize>,
    /// Fit of the selected configuration on all observations.
    pub refit: FittedModel,
}

/// Index of the smallest error; near-ties go to the larger total penalty.
pub fn select_index(grid: &[PenaltyConfig], errors: &[f64]) -> usize {
    let mut best = 0;
    for g in 1..errors.len() {
        let (e, b) = (errors[g], errors[best]);
        let tol = 1e-12 * b.abs().max(1.0);
        if e < b - tol || ((e - b).abs() <= tol && grid[g].total() > grid[best].total()) {
            best = g;
        }
    }
    best
}

fn fold_split(
    data: &OrdinalDataset,
    assignment: &[usize],
    fold: usize,
) -> Result<(OrdinalDataset, OrdinalDataset)> {
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..data.n()).partition(|&i| assignment[i] == fold);
    if test.is_empty() {
        return Err(MtclmError::DegenerateFold {
            fold,
            reason: "no held-out observations".into(),
        });
    }
    let train_data = data.subset(&train)?;
    let healthy = train_data.y().iter().filter(|&&l| l == 0).count();
    if healthy == 0 || healthy == train_data.n() {
        return Err(MtclmError::DegenerateFold {
            fold,
            reason: "training part lacks healthy or diseased observations; try stratified folds"
                .into(),
        });
    }
    Ok((train_data, data.subset(&test)?))
}

pub fn kfold_cv(
    data: &OrdinalDataset,
    method: Method,
    spec: &CvSpec,
    settings: &FitSettings,
) -> Result<CvResult> {
    data.validate()?;
    spec.validate(data.n())?;
    for pen in &spec.grid {
        method.check_penalty(pen)?;
    }
    let assignment = assign_folds(data.y(), spec.folds, spec.seed, spec.stratified);
    let splits: Vec<(OrdinalDataset, OrdinalDataset)> = (0..spec.folds)
        .map(|k| fold_split(data, &assignment, k))
        .collect::<Result<_>>()?;
    let folds_missing_levels = splits
        .iter()
        .enumerate()
        .filter(|(_, (train, _))| train.level_counts()[1..].contains(&0))
        .map(|(k, _)| k)
        .collect();

    // distinct configurations, heaviest first
    let mut unique: Vec<PenaltyConfig> = Vec::new();
    for pen in &spec.grid {
        if !unique.contains(pen) {
            unique.push(*pen);
        }
    }
    unique.sort_by(|a, b| b.total().total_cmp(&a.total()));

    let per_fold: Vec<Vec<f64>> = splits
        .par_iter()
        .map(|(train, test)| {
            let mut prev: Option<FittedModel> = None;
            let mut errs = Vec::with_capacity(unique.len());
            for pen in &unique {
                let model = fit_method(method, train, pen, settings, prev.as_ref())?;
                errs.push(model.heldout_nll(test)?);
                prev = Some(model);
            }
            Ok(errs)
        })
        .collect::<Result<_>>()?;

    let fold_errors: Vec<Vec<f64>> = spec
        .grid
        .iter()
        .map(|pen| {
            let u = unique.iter().position(|q| q == pen).unwrap_or(0);
            per_fold.iter().map(|errs| errs[u]).collect()
        })
        .collect();
    let mean_errors: Vec<f64> = fold_errors
        .iter()
        .map(|e| e.iter().sum::<f64>() / e.len() as f64)
        .collect();
    let selected_index = select_index(&spec.grid, &mean_errors);
    let selected = spec.grid[selected_index];
    let refit = fit_method(method, data, &selected, settings, None)?;
    Ok(CvResult {
        method,
        grid: spec.grid.clone(),
        fold_errors,
        mean_errors,
        selected_index,
        selected,
        fold_assignment: assignment,
        folds_missing_levels,
        refit,
    })
}

/// Writes the CV table: one row per grid point with its mean and per-fold errors.
pub fn write_cv_table<W: std::io::Write>(writer: W, cv: &CvResult) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let folds = cv.fold_errors.first().map_or(0, Vec::len);
    let mut header: Vec<String> = [
        "lambda11",
        "lambda12",
        "lambda_f",
        "lambda_g",
        "mean_cv_error",
        "selected",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=folds).map(|k| format!("fold{k}")));
    wtr.write_record(&header)
        .map_err(|e| MtclmError::Io(e.into()))?;
    for (g, pen) in cv.grid.iter().enumerate() {
        let mut rec = vec![
            pen.lambda11.to_string(),
            pen.lambda12.to_string(),
            pen.lambda_f.to_string(),
            pen.lambda_g.to_string(),
            cv.mean_errors[g].to_string(),
            (g == cv.selected_index).to_string(),
        ];
        rec.extend(cv.fold_errors[g].iter().map(|e| e.to_string()));
        wtr.write_record(&rec)
            .map_err(|e| MtclmError::Io(e.into()))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{generate, Scenario, ScenarioSpec};
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn default_grid_sizes() {
        assert_eq!(default_grid(GridKind::L1).len(), 4);
        assert_eq!(default_grid(GridKind::L1Fused).len(), 12);
        let g = default_grid(GridKind::L1Group);
        assert_eq!(g.len(), 12);
        assert!(g.iter().all(|p| p.lambda_f == 0.0));
        assert!(default_grid(GridKind::L1)
            .iter()
            .all(|p| p.lambda_f == 0.0 && p.lambda_g == 0.0));
    }

    #[test]
    fn tie_goes_to_heavier_penalty() {
        let grid = [
            PenaltyConfig::l1(0.01, 0.05),
            PenaltyConfig::l1(0.05, 0.1),
            PenaltyConfig::l1(0.01, 0.1),
        ];
        assert_eq!(select_index(&grid, &[1.0, 1.0, 1.0]), 1);
        assert_eq!(select_index(&grid, &[0.9, 1.0, 1.0]), 0);
    }

    #[test]
    fn single_point_grid() {
        let (d, _) = generate(&ScenarioSpec::new(Scenario::Identical, 80, 18, 1)).unwrap();
        let pen = PenaltyConfig::l1(0.05, 0.05);
        let spec = CvSpec::new(vec![pen], 3);
        let cv = kfold_cv(&d, Method::MtclmL1, &spec, &FitSettings::default()).unwrap();
        assert_eq!(cv.selected, pen);
        let mean = cv.fold_errors[0].iter().sum::<f64>() / 5.0;
        assert_eq!(cv.mean_errors[0], mean);
    }

    #[test]
    fn duplicate_grid_points_tie() {
        let (d, _) = generate(&ScenarioSpec::new(Scenario::Similar, 80, 18, 2)).unwrap();
        let pen = PenaltyConfig::fused(0.05, 0.05, 0.01);
        let spec = CvSpec::new(vec![PenaltyConfig::fused(0.01, 0.05, 0.0), pen, pen], 4);
        let cv = kfold_cv(&d, Method::MtclmFused, &spec, &FitSettings::default()).unwrap();
        assert_eq!(cv.mean_errors[1], cv.mean_errors[2]);
        assert_ne!(cv.selected_index, 2);
    }

    #[test]
    fn intercept_only_two_fold_by_hand() {
        // huge penalties leave the intercept-only fit
        let x = array![[0.3], [-1.0], [0.8], [0.1], [0.5], [-0.2], [1.1], [-0.7]];
        let d = OrdinalDataset::new(x, vec![0, 0, 0, 0, 1, 1, 2, 2], 2).unwrap();
        let spec = CvSpec {
            folds: 2,
            grid: vec![PenaltyConfig::l1(1e3, 1e3)],
            seed: 0,
            stratified: true,
        };
        let cv = kfold_cv(&d, Method::MtclmL1, &spec, &FitSettings::default()).unwrap();
        // every training half holds levels (0, 0, 1, 2): fitted P(Y = 0) = 1/2 and
        // P(Y = 1 | Y >= 1) = 1/2, so a held-out fold (0, 0, 1, 2) costs
        // (2 log 2 + 2 * 2 log 2) / 4
        assert!((cv.mean_errors[0] - 1.5 * 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn degenerate_fold_is_reported() {
        let x = array![[0.3], [-1.0], [0.8], [0.1]];
        let d = OrdinalDataset::new(x, vec![0, 0, 1, 2], 2).unwrap();
        let spec = CvSpec {
            folds: 2,
            grid: vec![PenaltyConfig::l1(0.1, 0.1)],
            seed: 0,
            stratified: false,
        };
        // some unstratified split of this tiny set leaves a single class in training
        let bad = (0..20u64).any(|seed| {
            let s = CvSpec {
                seed,
                ..spec.clone()
            };
            matches!(
                kfold_cv(&d, Method::MtclmL1, &s, &FitSettings::default()),
                Err(MtclmError::DegenerateFold { .. })
            )
        });
        assert!(bad);
    }

    #[test]
    fn missing_severity_level_is_noted_not_fatal() {
        let x = array![[0.3], [-1.0], [0.8], [0.1], [0.5], [-0.2], [1.1], [-0.7]];
        let d = OrdinalDataset::new(x, vec![0, 0, 0, 0, 1, 1, 1, 2], 2).unwrap();
        let spec = CvSpec {
            folds: 2,
            ..CvSpec::new(vec![PenaltyConfig::l1(0.05, 0.05)], 1)
        };
        let cv = kfold_cv(&d, Method::MtclmL1, &spec, &FitSettings::default()).unwrap();
        let lone = cv.fold_assignment[7];
        assert_eq!(cv.folds_missing_levels, vec![lone]);
        assert!(cv.mean_errors[0].is_finite());
    }

    #[test]
    fn baseline_cv_runs() {
        let (d, _) = generate(&ScenarioSpec::new(Scenario::Parallel, 100, 18, 3)).unwrap();
        let spec = CvSpec::new(default_grid(GridKind::Baseline), 1);
        let cv = kfold_cv(&d, Method::ClmL1, &spec, &FitSettings::default()).unwrap();
        assert_eq!(cv.mean_errors.len(), 3);
        assert!(cv.mean_errors.iter().all(|e| e.is_finite()));
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(
            y in prop::collection::vec(0usize..4, 8..120),
            folds in 2usize..6,
            seed in any::<u64>(),
        ) {
            let a = assign_folds(&y, folds, seed, true);
            prop_assert_eq!(a.len(), y.len());
            prop_assert!(a.iter().all(|&f| f < folds));
            for level in 0..4 {
                let counts: Vec<usize> = (0..folds)
                    .map(|f| (0..y.len()).filter(|&i| y[i] == level && a[i] == f).count())
                    .collect();
                let (mn, mx) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                prop_assert!(mx - mn <= 1);
            }
        }
    }
}
