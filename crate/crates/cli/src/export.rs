use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use vsnslice_core::exact::{Objective, SolverConfig};
use vsnslice_core::lpexport::{export_dynamic, export_global, write_lp, LinearModel, LpManifest};
use vsnslice_core::sim::{SimOptions, Simulation};
use vsnslice_core::Strategy;

use crate::run::{hex, write_json, TOOL};
use crate::workload::Workload;
use sha2::{Digest, Sha256};

/// Offline model over the whole horizon, or the model solved at one arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportMode {
    Global,
    /// 1-based position in arrival order.
    Dynamic(usize),
}

impl FromStr for ExportMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("global") {
            return Ok(ExportMode::Global);
        }
        let index =
            s.strip_prefix("dynamic@").ok_or_else(|| format!("unknown mode {s:?}; expected global or dynamic@N"))?;
        match index.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(ExportMode::Dynamic(n)),
            _ => Err(format!("arrival index {index:?} must be a positive integer")),
        }
    }
}

#[derive(Debug, Serialize)]
struct ExportManifest<'a> {
    tool: &'static str,
    mode: ExportMode,
    objective: Option<Objective>,
    /// Strategy that decided the arrivals before the exported one.
    replayed_with: Option<Strategy>,
    /// Application whose arrival the dynamic model decides.
    arriving_app: Option<usize>,
    workload: &'a Workload,
    config_hash: String,
    lp_sha256: String,
    model: LpManifest,
}

pub struct ExportRequest {
    pub workload: Workload,
    pub mode: ExportMode,
    pub objective: Objective,
    pub replay: Strategy,
    pub solver: SolverConfig,
    pub out: PathBuf,
}

/// Manifest path next to the `.lp` file.
pub fn manifest_path(lp: &Path) -> PathBuf {
    lp.with_extension("json")
}

pub fn export(req: &ExportRequest) -> Result<LinearModel> {
    let (scenario, topology) = req.workload.build()?;
    let (model, arriving) = match req.mode {
        ExportMode::Global => (export_global(&scenario, &topology), None),
        ExportMode::Dynamic(index) => {
            let mut order: Vec<&_> = scenario.apps.iter().collect();
            order.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.id.cmp(&b.id)));
            let Some(target) = order.get(index - 1) else {
                bail!("arrival index {index} is out of range; the scenario has {} arrivals", order.len());
            };
            let options = SimOptions { solver: req.solver, ..SimOptions::default() };
            let mut sim = Simulation::new(&scenario, &topology, req.replay, options);
            let arriving = sim.run_until_arrival(target.id)?;
            (export_dynamic(sim.state(), arriving, &topology, req.objective), Some(arriving.id))
        }
    };

    let text = write_lp(&model);
    if let Some(dir) = req.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(&req.out, &text).with_context(|| format!("writing {}", req.out.display()))?;

    let dynamic = matches!(req.mode, ExportMode::Dynamic(_));
    let mut manifest = ExportManifest {
        tool: TOOL,
        mode: req.mode,
        objective: dynamic.then_some(req.objective),
        replayed_with: dynamic.then_some(req.replay),
        arriving_app: arriving,
        workload: &req.workload,
        config_hash: String::new(),
        lp_sha256: hex(&Sha256::digest(text.as_bytes())),
        model: model.manifest(),
    };
    let config = serde_json::to_vec(&(manifest.mode, manifest.objective, manifest.replayed_with, manifest.workload))?;
    manifest.config_hash = hex(&Sha256::digest(config));
    write_json(&manifest_path(&req.out), &manifest)?;
    Ok(model)
}
