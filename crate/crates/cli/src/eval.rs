use std::path::Path;

use anyhow::{Context, Result};
use polarshape::io::{fmt_opt, write_text};
use polarshape::metrics::evaluate;
use polarshape::{MetricsReport, RunConfig};

use crate::dataset::{case_dirs, for_each_case, CaseInputs};
use crate::table::Table;
use crate::{emit, PredictorKind};

pub const METRICS_FILE: &str = "metrics.csv";

pub fn evaluate_case(dir: &Path, kind: PredictorKind, config: &RunConfig) -> Result<MetricsReport> {
    let case = CaseInputs::load(dir, config)?;
    let (disc, cup) = case.masks(kind, config)?;
    Ok(evaluate(&cup, &disc, &case.cup_gt, &case.disc_gt, &case.frame)?)
}

pub fn run(dataset: &Path, kind: PredictorKind, out: &Path, config: &RunConfig) -> Result<()> {
    let dirs = case_dirs(dataset)?;
    let (reports, skipped) = for_each_case(&dirs, |d| evaluate_case(d, kind, config))?;
    let mut table = Table::new(&MetricsReport::COLUMNS);
    for (name, r) in &reports {
        table.push(name, r.values().to_vec());
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join(METRICS_FILE), &table.to_csv(true))?;

    let mut summary = format!("evaluated {} of {} cases, {skipped} skipped\n", reports.len(), dirs.len());
    for (c, name) in table.columns().iter().enumerate() {
        let (mean, sd) = table.summary(c);
        summary.push_str(&format!("{name}: {} ± {}\n", fmt_opt(mean), fmt_opt(sd)));
    }
    emit(&summary);
    Ok(())
}
