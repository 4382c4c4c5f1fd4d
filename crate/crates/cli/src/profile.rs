use std::path::Path;

use anyhow::{Context, Result};
use polarshape::io::{fmt_opt, profiles_to_csv, write_text};
use polarshape::metrics::{mask_radius_profile, rim_profile, vcdr};
use polarshape::pipeline::render_masks;
use polarshape::{AngularProfile, BinaryMask, PolarGridSpec, RunConfig};

use crate::dataset::{case_name, model_predictor, CaseInputs};
use crate::{emit, PredictorKind};

pub const PROFILE_FILE: &str = "rim_profile.csv";

fn mask_rim(disc: &BinaryMask, cup: &BinaryMask, frame: &PolarGridSpec) -> Result<AngularProfile> {
    Ok(rim_profile(&mask_radius_profile(disc, frame)?, &mask_radius_profile(cup, frame)?)?)
}

pub fn run(dir: &Path, kind: PredictorKind, out: &Path, config: &RunConfig) -> Result<()> {
    let case = CaseInputs::load(dir, config).with_context(|| format!("loading case {}", dir.display()))?;
    let frame = &case.frame;
    let rim_gt = mask_rim(&case.disc_gt, &case.cup_gt, frame)?;
    let (rim_pred, disc, cup) = match model_predictor(kind, dir, config)? {
        None => {
            let (disc, cup) = case.predicted_masks()?;
            (mask_rim(&disc, &cup, frame)?, disc, cup)
        }
        Some(p) => {
            let d = case.decode(p.as_ref(), config)?;
            let (disc, cup) = render_masks(&d.nested, frame, config.mask_threshold);
            (rim_profile(&d.nested.disc_radius, &d.nested.cup_radius)?, disc, cup)
        }
    };
    let vcdr_pred = vcdr(&cup, &disc).ok();
    let vcdr_gt = vcdr(&case.cup_gt, &case.disc_gt).ok();

    let mut text = format!(
        "# case = {}\n# predictor = {}\n# vcdr_pred = {}\n# vcdr_gt = {}\n",
        case_name(dir),
        kind.name(),
        fmt_opt(vcdr_pred),
        fmt_opt(vcdr_gt)
    );
    text.push_str(&profiles_to_csv(&frame.thetas(), &[("rim_pred", &rim_pred), ("rim_gt", &rim_gt)])?);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join(PROFILE_FILE), &text)?;
    emit(&format!("vcdr_pred {} vcdr_gt {}\n", fmt_opt(vcdr_pred), fmt_opt(vcdr_gt)));
    Ok(())
}
