//! Experiment configuration, the pipeline stages behind the command-line
//! tool, and the run report.
//!
//! Every stage writes its artifacts under the output directory and returns a
//! [`StageOutput`] listing them together with the inequalities it checked.
//! Randomness comes from [`crate::rng::stream`] with one named stream per
//! stage and member, so output depends on the seed alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::complex::{random_pl_map, simplicial_approximation, ApproxOptions, PLMap};
use crate::cover::{cobounded_check, cover_stats, greedy_cover, nerve_projection, projection_stretch, Cover, Nerve};
use crate::embed::{
    audit_member, census_onset, compression_profile, far_pair_census, generate_c0_complex, hilbert_embed,
    nerve_embedding, normalize_lipschitz, random_point_in, scale_schedule, spectral_embedding, verdict_csv,
    C0GenOptions, EmbeddedCloud, NerveEmbeddingInfo, VerdictRow, AUDIT_TOL,
};
use crate::error::{Error, Result};
use crate::metric::{graph_metric, Graph};
use crate::rng::stream;
use crate::spectral::{compression_check, poincare_bound_check, random_regular, SpectralReport};

/// Version tag written into every report.
pub const SCHEMA: &str = "coarselab.report/1";

/// The only environment variable consulted: an output directory override.
pub const OUT_ENV: &str = "COARSELAB_OUT";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Member sizes of the regular graph family, strictly increasing.
    pub family: Vec<usize>,
    pub degree: usize,
    /// Cover scales used by the cover and nerve stages; the first one also
    /// drives the nerve embedding.
    pub scales: Vec<f64>,
    pub trials: usize,
    /// Number of eigenvector coordinates in the spectral embedding.
    pub embedding_dim: usize,
    pub max_exact_n: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    family: Option<Vec<usize>>,
    degree: Option<usize>,
    scales: Option<Vec<f64>>,
    trials: Option<usize>,
    embedding_dim: Option<usize>,
    max_exact_n: Option<usize>,
    out: Option<PathBuf>,
}

/// Values given on the command line; they win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub max_exact_n: Option<usize>,
    pub trials: Option<usize>,
}

impl ExperimentConfig {
    /// Builds a config from flat `key = value` text (may be empty), command
    /// line overrides and the output directory override from the environment.
    /// Precedence for `out`: command line, then environment, then file.
    pub fn resolve(text: Option<&str>, overrides: &Overrides, env_out: Option<PathBuf>) -> Result<Self> {
        let raw: RawConfig = match text {
            Some(t) => toml::from_str(t).map_err(|e| Error::Config(e.to_string()))?,
            None => RawConfig::default(),
        };
        let seed = overrides.seed.or(raw.seed).ok_or_else(|| Error::Config("seed is required".into()))?;
        let cfg = Self {
            seed,
            family: raw.family.unwrap_or_else(|| vec![16, 32, 64, 128, 256]),
            degree: raw.degree.unwrap_or(4),
            scales: raw.scales.unwrap_or_else(|| vec![3.0]),
            trials: overrides.trials.or(raw.trials).unwrap_or(100),
            embedding_dim: raw.embedding_dim.unwrap_or(3),
            max_exact_n: overrides.max_exact_n.or(raw.max_exact_n).unwrap_or(crate::spectral::DEFAULT_MAX_EXACT_N),
            out: overrides.out.clone().or(env_out).or(raw.out).unwrap_or_else(|| PathBuf::from("coarselab-out")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.family.is_empty() {
            return Err(Error::Config("family is empty".into()));
        }
        if self.family.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("family sizes must be strictly increasing".into()));
        }
        for &n in &self.family {
            if n * self.degree % 2 != 0 {
                return Err(Error::Parity { n, d: self.degree });
            }
            if self.degree < 3 || n <= self.degree {
                return Err(Error::RegularParams { n, d: self.degree });
            }
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding_dim must be at least 1".into()));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::Config("scales must be a non-empty list of positive numbers".into()));
        }
        Ok(())
    }

    fn rng(&self, name: &str) -> ChaCha8Rng {
        stream(self.seed, name)
    }
}

/// One asserted inequality `lhs relation rhs`, within `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub relation: &'static str,
    pub rhs: f64,
    /// Absolute slack allowed in the comparison.
    pub tolerance: f64,
    pub holds: bool,
}

impl Check {
    /// `lhs <= rhs + tolerance`.
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self { name: name.into(), lhs, relation: "<=", rhs, tolerance, holds: lhs <= rhs + tolerance }
    }

    /// `lhs >= rhs - tolerance`.
    pub fn ge(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self { name: name.into(), lhs, relation: ">=", rhs, tolerance, holds: lhs >= rhs - tolerance }
    }

    /// Strict `lhs < rhs`.
    pub fn lt(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), lhs, relation: "<", rhs, tolerance: 0.0, holds: lhs < rhs }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageOutput {
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub checks: Vec<Check>,
    pub info: BTreeMap<String, Value>,
}

impl StageOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.holds)
    }

    fn write(&mut self, out: &Path, rel: &str, contents: &str) -> Result<()> {
        let path = out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, contents)?;
        self.artifacts.push(rel.to_string());
        Ok(())
    }

    /// Writes the stage summary to `<stage>/summary.json`.
    pub fn save(&mut self, out: &Path, stage: &str) -> Result<()> {
        let rel = format!("{stage}/summary.json");
        self.artifacts.push(rel.clone());
        let text = serde_json::to_string_pretty(self).expect("stage output serializes");
        let path = out.join(&rel);
        fs::create_dir_all(path.parent().expect("stage directory"))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Generates the family; member `n` draws its graph seed from stream `gen/n`.
pub fn family(cfg: &ExperimentConfig) -> Result<Vec<Graph>> {
    cfg.family
        .par_iter()
        .map(|&n| random_regular(n, cfg.degree, cfg.rng(&format!("gen/{n}")).gen()))
        .collect()
}

/// The family as stored under `graphs/` by an earlier `gen`, or freshly
/// generated when no member file exists yet.
pub fn load_family(cfg: &ExperimentConfig) -> Result<Vec<Graph>> {
    let paths: Vec<PathBuf> = cfg.family.iter().map(|&n| cfg.out.join(format!("graphs/n{n:04}.json"))).collect();
    if !paths.iter().any(|p| p.exists()) {
        return family(cfg);
    }
    cfg.family
        .iter()
        .zip(&paths)
        .map(|(&n, p)| {
            let g = read_graph(p)?;
            if g.n() != n || g.degree() != cfg.degree {
                return Err(Error::InvalidGraph(format!("{} does not hold a {}-regular graph on {n} vertices", p.display(), cfg.degree)));
            }
            Ok(g)
        })
        .collect()
}

fn member_name(g: &Graph) -> String {
    format!("n{:04}", g.n())
}

pub fn stage_gen(cfg: &ExperimentConfig) -> Result<(Vec<Graph>, StageOutput)> {
    let graphs = family(cfg)?;
    let mut out = StageOutput::default();
    for g in &graphs {
        out.write(&cfg.out, &format!("graphs/{}.json", member_name(g)), &(g.to_json() + "\n"))?;
        out.checks.push(Check::le(
            format!("{}: edge count equals nd/2", member_name(g)),
            g.edges().len() as f64,
            (g.n() * g.degree() / 2) as f64,
            0.0,
        ));
    }
    Ok((graphs, out))
}

pub fn spectral_reports(cfg: &ExperimentConfig, graphs: &[Graph]) -> Result<Vec<SpectralReport>> {
    graphs.par_iter().map(|g| SpectralReport::new(g, cfg.max_exact_n)).collect()
}

fn spectral_csv(reports: &[SpectralReport]) -> String {
    let mut s = String::from("n,lambda1,h,h_method,c0\n");
    for r in reports {
        s += &format!("{},{},{},{},{}\n", r.n, r.lambda1, r.cheeger.lower(), r.cheeger.method(), r.c0);
    }
    s
}

/// Spectral reports of arbitrary graphs, written under `spectra/` with the
/// given file stems.
pub fn stage_spectra(
    cfg: &ExperimentConfig,
    graphs: &[Graph],
    names: &[String],
) -> Result<(Vec<SpectralReport>, StageOutput)> {
    let reports = spectral_reports(cfg, graphs)?;
    let mut out = StageOutput::default();
    for (r, name) in reports.iter().zip(names) {
        out.write(&cfg.out, &format!("spectra/{name}.json"), &(r.to_json() + "\n"))?;
        out.checks.push(Check::ge(format!("{name}: lambda1 is positive"), r.lambda1, 0.0, 0.0));
        if r.cheeger.method() == "exact" {
            // Reported, not asserted: constants of this inequality depend on
            // the boundary convention.
            let h = r.cheeger.lower();
            out.info.insert(
                format!("{name}.cheeger_lower_calibration"),
                json!({"half_lambda1": r.lambda1 / 2.0, "h": h, "holds": r.lambda1 / 2.0 <= h + 1e-12}),
            );
        }
    }
    out.write(&cfg.out, "spectra/family.csv", &spectral_csv(&reports))?;
    Ok((reports, out))
}

pub fn stage_poincare(cfg: &ExperimentConfig, graphs: &[Graph]) -> Result<StageOutput> {
    let results: Vec<_> = graphs
        .par_iter()
        .map(|g| {
            let p = poincare_bound_check(g, cfg.trials, &mut cfg.rng(&format!("poincare/{}", g.n())))?;
            let c = compression_check(g, cfg.trials, &mut cfg.rng(&format!("compression/{}", g.n())))?;
            Ok((member_name(g), p, c))
        })
        .collect::<Result<_>>()?;
    let mut out = StageOutput::default();
    for (name, p, c) in results {
        let doc = json!({"poincare": p, "compression": c});
        out.write(&cfg.out, &format!("poincare/{name}.json"), &(doc.to_string() + "\n"))?;
        out.checks.push(Check::le(
            format!("{name}: random Poincare ratio <= c0"),
            p.max_random_ratio,
            p.c0,
            p.c0 * p.tolerance,
        ));
        out.checks.push(Check::ge(
            format!("{name}: eigenvector ratio attains c0"),
            p.eigenvector_ratio,
            p.c0,
            p.c0 * p.tolerance,
        ));
        out.checks.push(Check::le(format!("{name}: 1-Lipschitz pair average <= c0"), c.max_pair_mean, c.c0, c.c0 * 1e-9));
    }
    Ok(out)
}

/// Greedy covers of every member at every configured scale.
pub fn stage_cover(cfg: &ExperimentConfig, graphs: &[Graph]) -> Result<(Vec<Vec<Cover>>, StageOutput)> {
    let covers: Vec<Vec<Cover>> = graphs
        .par_iter()
        .map(|g| {
            let x = graph_metric(g)?;
            cfg.scales.iter().map(|&s| greedy_cover(&x, s, 8)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = StageOutput::default();
    let mut summary = String::from("n,scale,sets,mesh,multiplicity,lebesgue\n");
    for (g, row) in graphs.iter().zip(&covers) {
        let x = graph_metric(g)?;
        for (j, c) in row.iter().enumerate() {
            let st = cover_stats(&x, c);
            summary += &format!("{},{},{},{},{},{}\n", g.n(), c.lambda, c.len(), st.mesh, st.multiplicity, st.lebesgue);
            out.write(&cfg.out, &format!("covers/{}_s{j}.json", member_name(g)), &(c.to_json() + "\n"))?;
            out.checks.push(Check::le(
                format!("{}_s{j}: mesh <= 4 lambda", member_name(g)),
                st.mesh,
                4.0 * c.lambda,
                0.0,
            ));
        }
    }
    out.write(&cfg.out, "covers/summary.csv", &summary)?;
    Ok((covers, out))
}

/// Nerves, projections and their checks. The Lipschitz check of the
/// projection is made only when the measured Lebesgue number is at least 2,
/// the unit edge length of the graph (see the README).
pub fn stage_nerve(cfg: &ExperimentConfig, graphs: &[Graph], covers: &[Vec<Cover>]) -> Result<StageOutput> {
    struct Item {
        name: String,
        nerve: Nerve,
        csv: String,
        leb: f64,
        mesh: f64,
        cobounded: crate::cover::CoboundedReport,
        stretch: Option<f64>,
    }
    let jobs: Vec<(usize, usize)> =
        (0..graphs.len()).flat_map(|i| (0..covers[i].len()).map(move |j| (i, j))).collect();
    let items: Vec<Item> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let g = &graphs[i];
            let x = graph_metric(g)?;
            let c = &covers[i][j];
            let st = cover_stats(&x, c);
            let p = nerve_projection(&x, c, st.lebesgue / 2.0)?;
            let cobounded = cobounded_check(&x, &p, st.mesh);
            let stretch = if st.lebesgue >= 2.0 { Some(projection_stretch(&x, &p, 1)?.0) } else { None };
            Ok(Item {
                name: format!("{}_s{j}", member_name(g)),
                nerve: p.nerve.clone(),
                csv: p.to_csv(),
                leb: st.lebesgue,
                mesh: st.mesh,
                cobounded,
                stretch,
            })
        })
        .collect::<Result<_>>()?;
    let mut out = StageOutput::default();
    for it in items {
        out.write(&cfg.out, &format!("nerve/{}.json", it.name), &(it.nerve.to_json() + "\n"))?;
        out.write(&cfg.out, &format!("nerve/{}.off", it.name), &it.nerve.to_off())?;
        out.write(&cfg.out, &format!("nerve/{}_projection.csv", it.name), &it.csv)?;
        out.checks.push(Check::le(
            format!("{}: simplex preimage diameter <= mesh", it.name),
            it.cobounded.worst_diameter,
            it.mesh,
            0.0,
        ));
        match it.stretch {
            Some(l) => out.checks.push(Check::le(format!("{}: projection Lipschitz <= 1", it.name), l, 1.0, 1e-9)),
            None => {
                out.info.insert(format!("{}.lipschitz_unchecked_lebesgue", it.name), json!(it.leb));
            }
        }
    }
    Ok(out)
}

/// Spectral and nerve embeddings of one member, both 1-Lipschitz.
#[derive(Debug, Clone)]
pub struct MemberEmbeddings {
    pub spectral: Vec<Vec<f64>>,
    pub nerve: Vec<Vec<f64>>,
}

fn cloud(provenance: &str, vectors: &[Vec<f64>]) -> EmbeddedCloud {
    EmbeddedCloud {
        provenance: provenance.into(),
        labels: (0..vectors.len()).map(|i| i.to_string()).collect(),
        vectors: vectors.to_vec(),
    }
}

fn graph_distances(g: &Graph) -> Vec<Vec<usize>> {
    (0..g.n()).into_par_iter().map(|v| g.bfs(v)).collect()
}

/// Spectral and nerve embeddings of every member.
pub fn embeddings(cfg: &ExperimentConfig, graphs: &[Graph]) -> Result<Vec<(MemberEmbeddings, NerveEmbeddingInfo)>> {
    graphs
        .par_iter()
        .map(|g| {
            let spectral = spectral_embedding(g, cfg.embedding_dim);
            let (nerve, info) = nerve_embedding(g, cfg.scales[0])?;
            Ok((MemberEmbeddings { spectral, nerve }, info))
        })
        .collect()
}

/// Embeds every member two ways and, as a standalone certificate, embeds a
/// generated class-C₀ complex with the scale-weighted barycentric map.
pub fn stage_embed(cfg: &ExperimentConfig, graphs: &[Graph]) -> Result<(Vec<MemberEmbeddings>, StageOutput)> {
    let embedded = embeddings(cfg, graphs)?;
    let mut out = StageOutput::default();
    for (g, (e, info)) in graphs.iter().zip(&embedded) {
        let name = member_name(g);
        let dist = graph_distances(g);
        for (src, v) in [("spectral", &e.spectral), ("nerve", &e.nerve)] {
            out.write(&cfg.out, &format!("embed/{name}_{src}.json"), &(cloud(src, v).to_json() + "\n"))?;
            let profile = compression_profile(v, |i, j| dist[i][j] as f64);
            out.write(&cfg.out, &format!("embed/{name}_{src}_profile.csv"), &profile.to_csv())?;
        }
        out.checks.push(Check::le(format!("{name}: nerve embedding stretch on simplices <= 3"), info.simplex_stretch, 3.0, 1e-9));
        out.info.insert(format!("{name}.nerve"), serde_json::to_value(info).expect("info serializes"));
    }

    let mut rng = cfg.rng("embed/c0");
    let k = generate_c0_complex(&mut rng, &C0GenOptions::default())?;
    let nf = k.facets().len();
    let mut points = Vec::new();
    for _ in 0..nf.min(20) {
        let f = rng.gen_range(0..nf);
        points.extend((0..40).map(|_| random_point_in(&k, f, &mut rng)));
    }
    let h = hilbert_embed(&k, &points, 1)?;
    let min_ratio = h.scale.l.iter().zip(&h.scale.rho).map(|(l, r)| r / l).fold(f64::INFINITY, f64::min);
    out.write(&cfg.out, "embed/c0_complex.json", &(k.to_json() + "\n"))?;
    out.write(&cfg.out, "embed/c0_cloud.json", &(h.cloud.to_json() + "\n"))?;
    out.checks.push(Check::le("c0: embedding stretch on simplices <= 3", h.max_ratio, 3.0, 1e-9));
    out.checks.push(Check::ge("c0: rho / l >= 1/2", min_ratio, 0.5, 1e-12));
    out.info.insert("c0.pairs_checked".into(), json!(h.pairs_checked));
    Ok((embedded.into_iter().map(|(e, _)| e).collect(), out))
}

fn push_verdict(out: &mut StageOutput, r: &VerdictRow) {
    let tag = format!("{}_n{:04}", r.source, r.n);
    out.checks.push(Check::le(
        format!("{tag}: min far-pair squared distance <= 4 c0"),
        r.min_far_sq,
        r.bound_4c0,
        r.bound_4c0 * AUDIT_TOL,
    ));
    out.checks.push(Check::le(
        format!("{tag}: rho1 at threshold <= 2 sqrt(c0)"),
        r.rho1_at_threshold,
        r.rho1_ceiling,
        r.rho1_ceiling * AUDIT_TOL,
    ));
}

/// Far-pair census, scale schedule and the compression audit of both
/// embeddings of every member.
pub fn stage_audit(
    cfg: &ExperimentConfig,
    graphs: &[Graph],
    reports: &[SpectralReport],
    embeddings: &[MemberEmbeddings],
) -> Result<StageOutput> {
    let mut out = StageOutput::default();
    let censuses = graphs.par_iter().map(far_pair_census).collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("n,threshold,far_pairs,near_pairs,fraction,meets_n2_over_8,max_near_per_vertex,ball_bound\n");
    for c in &censuses {
        csv += &format!(
            "{},{},{},{},{},{},{},{}\n",
            c.n, c.threshold, c.far_pairs, c.near_pairs, c.fraction, c.meets_n2_over_8, c.max_near_per_vertex, c.ball_bound
        );
        out.checks.push(Check::le(
            format!("n{:04}: near pairs per vertex <= 2 d^k", c.n),
            c.max_near_per_vertex as f64,
            c.ball_bound,
            0.0,
        ));
        if c.n >= 64 {
            out.checks.push(Check::ge(
                format!("n{:04}: far pairs >= n^2/8", c.n),
                c.far_pairs as f64,
                (c.n * c.n) as f64 / 8.0,
                0.0,
            ));
        }
    }
    out.info.insert("census_onset".into(), json!(census_onset(&censuses)));
    out.write(&cfg.out, "audit/census.csv", &csv)?;
    let schedule = scale_schedule(graphs)?;
    out.write(&cfg.out, "audit/schedule.json", &(serde_json::to_string(&schedule).expect("schedule") + "\n"))?;

    let jobs: Vec<(usize, &str)> = (0..graphs.len()).flat_map(|i| [(i, "spectral"), (i, "nerve")]).collect();
    let rows: Vec<(VerdictRow, String)> = jobs
        .par_iter()
        .map(|&(i, src)| {
            let g = &graphs[i];
            let v = if src == "spectral" { &embeddings[i].spectral } else { &embeddings[i].nerve };
            let row = audit_member(g, &reports[i], src, v);
            let mut f = v.clone();
            normalize_lipschitz(g, &mut f);
            let dist = graph_distances(g);
            (row, compression_profile(&f, |a, b| dist[a][b] as f64).to_csv())
        })
        .collect();
    for (row, curve) in &rows {
        push_verdict(&mut out, row);
        out.write(&cfg.out, &format!("audit/curves/{}_n{:04}.csv", row.source, row.n), curve)?;
    }
    let rows: Vec<VerdictRow> = rows.into_iter().map(|r| r.0).collect();
    out.write(&cfg.out, "audit/verdict.csv", &verdict_csv(&rows))?;
    let family_c0 = reports.iter().map(|r| r.c0).fold(0.0, f64::max);
    for src in ["spectral", "nerve"] {
        let plateau = rows.iter().filter(|r| r.source == src).map(|r| r.rho1_at_threshold).fold(0.0, f64::max);
        out.checks.push(Check::le(
            format!("{src}: rho1 at thresholds stays below 2 sqrt(family c0)"),
            plateau,
            2.0 * family_c0.sqrt(),
            2.0 * family_c0.sqrt() * AUDIT_TOL,
        ));
    }
    Ok(out)
}

/// Audits a user-supplied cloud on one graph. Clouds that are not
/// 1-Lipschitz are rescaled first.
pub fn audit_cloud(cfg: &ExperimentConfig, g: &Graph, cloud: &EmbeddedCloud) -> Result<StageOutput> {
    if cloud.vectors.len() != g.n() {
        return Err(Error::Parse {
            path: "<cloud>".into(),
            msg: format!("cloud has {} points, graph has {}", cloud.vectors.len(), g.n()),
        });
    }
    let report = SpectralReport::new(g, cfg.max_exact_n)?;
    let source = if cloud.provenance.is_empty() { "user" } else { cloud.provenance.as_str() };
    let row = audit_member(g, &report, source, &cloud.vectors);
    let mut f = cloud.vectors.clone();
    normalize_lipschitz(g, &mut f);
    let dist = graph_distances(g);
    let mut out = StageOutput::default();
    push_verdict(&mut out, &row);
    out.info.insert("rescale".into(), json!(row.rescale));
    out.write(&cfg.out, "audit/verdict.csv", &verdict_csv(std::slice::from_ref(&row)))?;
    out.write(
        &cfg.out,
        &format!("audit/curves/{}_n{:04}.csv", row.source, row.n),
        &compression_profile(&f, |a, b| dist[a][b] as f64).to_csv(),
    )?;
    Ok(out)
}

/// Simplicial approximation of `map`, or of a random PL map drawn from
/// stream `approx` when none is given.
pub fn stage_approx(
    cfg: &ExperimentConfig,
    map: Option<PLMap>,
    lambda: Option<f64>,
    depth: Option<usize>,
) -> Result<StageOutput> {
    let f = match map {
        Some(f) => f,
        None => random_pl_map(&mut cfg.rng("approx"), 2)?,
    };
    let g = simplicial_approximation(&f, &ApproxOptions { lambda, depth, ..Default::default() })?;
    let mut out = StageOutput::default();
    out.write(&cfg.out, "approx/map.json", &(f.to_json() + "\n"))?;
    out.write(&cfg.out, "approx/approximation.json", &(g.to_json() + "\n"))?;
    let passed = g.checks.iter().filter(|c| c.min_coord > 0.0).count();
    out.checks.push(Check::ge(
        "star condition holds at every subdivided vertex",
        passed as f64,
        g.subdivision.complex.n_vertices() as f64,
        0.0,
    ));
    out.checks.push(Check::lt("mesh below r / (4 lambda)", g.mesh, g.required_mesh));
    out.checks.push(Check::le("homotopy Lipschitz constant <= 1 / inradius", g.homotopy_lipschitz, g.mu, 1e-9 * g.mu));
    Ok(out)
}

/// Everything a full run produces besides the stage artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub config: ExperimentConfig,
    pub stages: BTreeMap<String, StageOutput>,
    pub checks: usize,
    pub failed: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Runs every stage in order and writes `report.json`.
pub fn run_all(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut stages = BTreeMap::new();
    let (graphs, gen) = stage_gen(cfg)?;
    stages.insert("gen".to_string(), gen);
    let names: Vec<String> = graphs.iter().map(member_name).collect();
    let (reports, spectra) = stage_spectra(cfg, &graphs, &names)?;
    stages.insert("spectra".into(), spectra);
    stages.insert("poincare".into(), stage_poincare(cfg, &graphs)?);
    let (covers, cover) = stage_cover(cfg, &graphs)?;
    stages.insert("cover".into(), cover);
    stages.insert("nerve".into(), stage_nerve(cfg, &graphs, &covers)?);
    let (embeddings, embed) = stage_embed(cfg, &graphs)?;
    stages.insert("embed".into(), embed);
    stages.insert("audit".into(), stage_audit(cfg, &graphs, &reports, &embeddings)?);
    stages.insert("approx".into(), stage_approx(cfg, None, None, None)?);
    let checks = stages.values().map(|s| s.checks.len()).sum();
    let failed = stages.values().flat_map(|s| s.failures().map(|c| c.name.clone())).collect();
    let report = RunReport { schema: SCHEMA, config: cfg.clone(), stages, checks, failed };
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("report.json"), serde_json::to_string_pretty(&report).expect("report serializes") + "\n")?;
    Ok(report)
}

/// Reads a graph file, tagging parse failures with the path.
pub fn read_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path)?;
    Graph::from_json(&text).map_err(|e| relabel(e, path))
}

/// Replaces the placeholder path of a parse error with `path`.
pub fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { msg, .. } => Error::Parse { path: path.display().to_string(), msg },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::resolve(Some(text), &Overrides::default(), None)
    }

    #[test]
    fn seed_is_required() {
        assert!(matches!(cfg("degree = 4"), Err(Error::Config(_))));
        let c = ExperimentConfig::resolve(None, &Overrides { seed: Some(3), ..Default::default() }, None).unwrap();
        assert_eq!(c.seed, 3);
    }

    #[test]
    fn parity_and_unknown_keys_are_config_errors() {
        let e = cfg("seed = 1\nfamily = [5]\ndegree = 3").unwrap_err();
        assert!(matches!(e, Error::Parity { n: 5, d: 3 }));
        assert_eq!(e.exit_code(), 2);
        assert!(matches!(cfg("seed = 1\ncolour = 3"), Err(Error::Config(_))));
        assert!(matches!(cfg("seed = 1\ntrials = 0"), Err(Error::Config(_))));
    }

    #[test]
    fn out_precedence() {
        let file = "seed = 1\nout = \"a\"";
        let env = Some(PathBuf::from("b"));
        assert_eq!(ExperimentConfig::resolve(Some(file), &Overrides::default(), None).unwrap().out, PathBuf::from("a"));
        assert_eq!(ExperimentConfig::resolve(Some(file), &Overrides::default(), env.clone()).unwrap().out, PathBuf::from("b"));
        let cli = Overrides { out: Some(PathBuf::from("c")), ..Default::default() };
        assert_eq!(ExperimentConfig::resolve(Some(file), &cli, env).unwrap().out, PathBuf::from("c"));
    }

    #[test]
    fn check_relations() {
        assert!(Check::le("a", 1.0, 1.0, 0.0).holds);
        assert!(!Check::le("a", 1.1, 1.0, 0.05).holds);
        assert!(Check::ge("a", 0.99, 1.0, 0.02).holds);
        assert!(!Check::lt("a", 1.0, 1.0).holds);
    }
}
