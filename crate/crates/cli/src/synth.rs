use std::path::Path;

use anyhow::{Context, Result};
use polarshape::io::{write_mask, write_text};
use polarshape::synth::{
    gen_case, manifest_header, manifest_row, suite_entries, write_case, CUP_PRED_FILE, DISC_PRED_FILE,
};
use polarshape::RunConfig;
use rayon::prelude::*;

use crate::emit;

pub const MANIFEST_FILE: &str = "manifest.csv";

pub fn run(count: usize, seed: u64, out: &Path, config: &RunConfig) -> Result<()> {
    let suite = config.suite(count, seed);
    let entries = suite_entries(&suite)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    entries.par_iter().try_for_each(|e| -> Result<()> {
        let case = gen_case(&e.spec, e.corruption, suite.height, suite.width)?;
        let dir = out.join(&e.name);
        write_case(&dir, &case).with_context(|| format!("writing {}", dir.display()))?;
        // Placeholder predictions equal to the ground truth, so a fresh tree
        // self-evaluates with `--predictor masks`.
        write_mask(&dir.join(DISC_PRED_FILE), &case.disc_mask)?;
        write_mask(&dir.join(CUP_PRED_FILE), &case.cup_mask)?;
        Ok(())
    })?;
    let mut manifest = manifest_header().to_string();
    entries.iter().for_each(|e| manifest.push_str(&manifest_row(e)));
    write_text(&out.join(MANIFEST_FILE), &manifest)?;
    emit(&format!("wrote {} cases to {}\n", entries.len(), out.display()));
    Ok(())
}
