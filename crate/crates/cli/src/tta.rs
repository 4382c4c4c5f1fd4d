use std::path::Path;

use anyhow::{Context, Result};
use polarshape::io::{fmt_opt, fmt_sig, write_text};
use polarshape::metrics::evaluate;
use polarshape::pipeline::render_masks;
use polarshape::tta::run_tta;
use polarshape::{MetricsReport, RunConfig, TtaOutcome};

use crate::dataset::{case_dirs, for_each_case, model_predictor, require_model, CaseInputs};
use crate::table::Table;
use crate::{emit, PredictorKind};

pub const TTA_FILE: &str = "tta.csv";
pub const SCORES_FILE: &str = "tta_scores.csv";

const COMPARED: [&str; 5] = ["dice_disc", "dice_cup", "hd95_disc", "hd95_cup", "vcdr_ae"];

struct CaseTta {
    pre: MetricsReport,
    post: MetricsReport,
    outcome: TtaOutcome,
}

fn compared(r: &MetricsReport) -> [Option<f64>; 5] {
    [Some(r.dice_disc), Some(r.dice_cup), r.hd95_disc, r.hd95_cup, r.vcdr_ae]
}

fn tta_case(dir: &Path, kind: PredictorKind, config: &RunConfig) -> Result<CaseTta> {
    let case = CaseInputs::load(dir, config)?;
    let predictor = model_predictor(kind, dir, config)?.expect("model predictor checked by caller");
    let thr = config.mask_threshold;

    let identity = case.decode(predictor.as_ref(), config)?;
    let (disc, cup) = render_masks(&identity.nested, &case.frame, thr);
    let pre = evaluate(&cup, &disc, &case.cup_gt, &case.disc_gt, &case.frame)?;

    let outcome = run_tta(&case.image, predictor.as_ref(), &case.frame, &config.decode, &config.tta, thr)?;
    let (disc, cup) = render_masks(&outcome.nested, &case.frame, thr);
    let post = evaluate(&cup, &disc, &case.cup_gt, &case.disc_gt, &case.frame)?;
    Ok(CaseTta { pre, post, outcome })
}

fn chosen_cell(outcome: &TtaOutcome) -> String {
    outcome
        .chosen
        .iter()
        .map(|(h, w)| format!("{}:{}:{}@{}", fmt_sig(h.dx), fmt_sig(h.dy), fmt_sig(h.scale), fmt_sig(*w)))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn run(dataset: &Path, kind: PredictorKind, out: &Path, config: &RunConfig, verbose: bool) -> Result<()> {
    require_model(kind, "tta")?;
    let dirs = case_dirs(dataset)?;
    let (cases, skipped) = for_each_case(&dirs, |d| tta_case(d, kind, config))?;

    let mut columns: Vec<String> = Vec::new();
    for stage in ["pre", "post"] {
        columns.extend(COMPARED.iter().map(|c| format!("{stage}_{c}")));
    }
    columns.extend(["best_dx", "best_dy", "best_scale", "best_score", "dropped"].map(String::from));
    let mut table = Table::new(&columns);
    let mut scores = Table::new(&["dx", "dy", "scale", "occupancy", "confidence", "compactness", "score"]);
    let mut improved = 0;
    for (name, c) in &cases {
        let (best, best_score) = c.outcome.best();
        let mut row: Vec<Option<f64>> = compared(&c.pre).into_iter().chain(compared(&c.post)).collect();
        row.extend([best.dx, best.dy, best.scale, best_score.score, c.outcome.dropped as f64].map(Some));
        table.push(name, row);
        if c.post.dice_disc >= c.pre.dice_disc {
            improved += 1;
        }
        for (h, s) in &c.outcome.scores {
            let mut row = vec![Some(h.dx), Some(h.dy), Some(h.scale)];
            match s {
                Some(s) => row.extend([s.mean_disc_occupancy, s.mean_gate_confidence, s.compactness, s.score].map(Some)),
                None => row.extend([None; 4]),
            }
            scores.push(name, row);
        }
    }

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    // The chosen hypotheses are text, so they get their own trailing column.
    let mut csv = String::new();
    for (k, line) in table.to_csv(false).lines().enumerate() {
        csv.push_str(line);
        csv.push(',');
        csv.push_str(&if k == 0 { "chosen".to_string() } else { chosen_cell(&cases[k - 1].1.outcome) });
        csv.push('\n');
    }
    write_text(&out.join(TTA_FILE), &csv)?;
    if verbose {
        write_text(&out.join(SCORES_FILE), &scores.to_csv(false))?;
    }

    let mut summary = format!("searched {} of {} cases, {skipped} skipped\n", cases.len(), dirs.len());
    summary.push_str(&format!("post-search disc Dice >= identity on {improved} of {} cases\n", cases.len()));
    for (c, name) in COMPARED.iter().enumerate() {
        let (pre, _) = table.summary(c);
        let (post, _) = table.summary(c + COMPARED.len());
        summary.push_str(&format!("{name}: {} -> {}\n", fmt_opt(pre), fmt_opt(post)));
    }
    emit(&summary);
    Ok(())
}
