//! JSON run reports, schema 1.
//!
//! Every report is an object with `"schema": 1` and `"command"`. Floats are
//! written in shortest round-trip form. Wall-clock timings appear only when
//! requested, under `"timings_ms"`, so default reports are byte-stable.

use std::collections::BTreeMap;

use expander_forge::format::GraphHeader;
use expander_forge::multigraph::Girth;
use expander_forge::spectra::{EigenMethod, SpectralReport};
use expander_forge::tower::{
    CoveringSummary, LevelReport, LoopWitness, Mode, ProbeReport, Tower, TwistSummary, Variant,
};
use serde::Serialize;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub q1: u64,
    pub q2: u64,
    pub levels: u32,
    pub variant: Variant,
    pub mode: Mode,
    pub twist: Option<TwistSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub lambda_top: f64,
    pub top_multiplicity: usize,
    pub lambda_bottom: f64,
    pub bottom_multiplicity: usize,
    pub max_abs_nontrivial: f64,
    pub ramanujan_bound: f64,
    pub ramanujan_tolerance: f64,
    pub ramanujan: bool,
    pub eig_method: EigenMethod,
    pub max_residual: f64,
    pub iterations: usize,
}

impl From<&SpectralReport> for SpectrumSummary {
    fn from(s: &SpectralReport) -> Self {
        Self {
            lambda_top: s.lambda_top,
            top_multiplicity: s.top_multiplicity,
            lambda_bottom: s.lambda_bottom,
            bottom_multiplicity: s.bottom_multiplicity,
            max_abs_nontrivial: s.max_abs_nontrivial,
            ramanujan_bound: s.ramanujan_bound,
            ramanujan_tolerance: s.tolerance,
            ramanujan: s.ramanujan,
            eig_method: s.method,
            max_residual: s.max_residual,
            iterations: s.iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub n: u32,
    pub vertices: usize,
    pub directed_edge_count: usize,
    pub regular_degree: Option<usize>,
    pub connected: bool,
    pub girth: Girth,
    pub girth_lower_bound: Option<usize>,
    pub loop_count: usize,
    pub bipartite: bool,
    pub generators_in_psl: bool,
    pub loop_witness: Option<LoopWitness>,
    pub spectrum: SpectrumSummary,
}

impl From<&LevelReport> for LevelSummary {
    fn from(r: &LevelReport) -> Self {
        Self {
            n: r.n,
            vertices: r.vertices,
            directed_edge_count: r.directed_edges,
            regular_degree: r.regular_degree,
            connected: r.connected,
            girth: r.girth,
            girth_lower_bound: r.girth_lower_bound,
            loop_count: r.loop_count,
            bipartite: r.bipartite,
            generators_in_psl: r.generators_in_psl,
            loop_witness: r.loop_witness,
            spectrum: (&r.spectral).into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivorSummary {
    pub word: String,
    pub letters: Vec<usize>,
    pub quaternion: [i128; 4],
    pub matrices: Vec<[u64; 4]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeSummary {
    pub max_word_len: usize,
    pub up_to_level: u32,
    pub twist_seed: Option<u64>,
    pub words_examined: u64,
    pub survivors_per_level: Vec<usize>,
    pub gamma_word: Vec<usize>,
    pub gamma_survives: bool,
    pub survivors: Vec<SurvivorSummary>,
}

impl From<&ProbeReport> for ProbeSummary {
    fn from(p: &ProbeReport) -> Self {
        Self {
            max_word_len: p.max_word_len,
            up_to_level: p.up_to_level,
            twist_seed: p.twist_seed,
            words_examined: p.words_examined,
            survivors_per_level: p.survivors_per_level.clone(),
            gamma_word: p.gamma_word.letters.clone(),
            gamma_survives: p.gamma_survives,
            survivors: p
                .survivors
                .iter()
                .map(|s| SurvivorSummary {
                    word: s.word.to_string(),
                    letters: s.word.letters.clone(),
                    quaternion: s.quaternion.coefficients(),
                    matrices: s.matrices.iter().map(|m| m.entries()).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TowerReport {
    pub schema: u32,
    pub command: &'static str,
    pub config: ConfigEcho,
    pub levels: Vec<LevelSummary>,
    pub coverings: Vec<CoveringSummary>,
    pub probe: ProbeSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl TowerReport {
    pub fn new(tower: &Tower, timings_ms: Option<BTreeMap<String, f64>>) -> Self {
        let cfg = &tower.config;
        Self {
            schema: SCHEMA,
            command: "tower",
            config: ConfigEcho {
                q1: cfg.q1,
                q2: cfg.q2,
                levels: cfg.levels,
                variant: cfg.variant,
                mode: tower.mode,
                twist: tower.twist_summary(),
            },
            levels: tower.level_reports.iter().map(Into::into).collect(),
            coverings: tower.covering_summaries.clone(),
            probe: (&tower.probe).into(),
            timings_ms,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub schema: u32,
    pub command: &'static str,
    pub input: GraphHeader,
    pub vertices: usize,
    pub directed_edge_count: usize,
    pub q: u64,
    pub bipartite: bool,
    pub spectrum: SpectrumSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRunReport {
    pub schema: u32,
    pub command: &'static str,
    pub q1: u64,
    pub q2: u64,
    pub twist: Option<TwistSummary>,
    pub probe: ProbeSummary,
}

pub fn to_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}
