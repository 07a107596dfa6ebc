use super::ScenarioConfig;
use crate::error::{Error, Result};
use crate::galerkin::{GalerkinSpace, Y_DOFS_PER_NODE};
use crate::solver::{LedgerRow, State, Trajectory};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

pub const LEDGER_HEADER: &str = "t,kinetic,thermal,mechanical,boundary_spring,dissipation_cum,work_cum,\
flux_water_cum,flux_heat_cum,residual_total,entropy,entropy_production,min_detP,zeta_violation";

pub const DETAIL_HEADER: &str = "t,step,stored,barrier,bending,plastic_gradient,damage_gradient,porosity_gradient,\
water_gradient,penalty,heat_cum,work_gravity_cum,work_spring_cum,entropy_production_min,min_vartheta";

/// Snapshot block order. `y*`/`v*` are the Hermite nodal dofs (value, ∂x,
/// ∂y, ∂xy) of each component; `p11 … p22` the plastic strain row by row.
pub const SNAPSHOT_FIELDS: [&str; 26] = [
    "y0", "y0_x", "y0_y", "y0_xy", "y1", "y1_x", "y1_y", "y1_xy", "v0", "v0_x", "v0_y", "v0_xy", "v1", "v1_x",
    "v1_y", "v1_xy", "p11", "p12", "p21", "p22", "alpha", "phi", "zeta", "mu", "vartheta", "phi0",
];

/// One row of `ledger.csv`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LedgerCsvRow {
    pub t: f64,
    pub kinetic: f64,
    pub thermal: f64,
    pub mechanical: f64,
    pub boundary_spring: f64,
    pub dissipation_cum: f64,
    pub work_cum: f64,
    pub flux_water_cum: f64,
    pub flux_heat_cum: f64,
    pub residual_total: f64,
    pub entropy: f64,
    pub entropy_production: f64,
    pub min_det_p: f64,
    pub zeta_violation: f64,
}

impl LedgerCsvRow {
    pub fn from_row(r: &LedgerRow) -> Self {
        let e = &r.energies;
        let c = &r.cumulative;
        LedgerCsvRow {
            t: r.t,
            kinetic: e.kinetic,
            thermal: e.thermal,
            mechanical: e.mechanical(),
            boundary_spring: e.spring,
            dissipation_cum: c.dissipation,
            work_cum: r.work(),
            flux_water_cum: c.flux_water,
            flux_heat_cum: c.flux_heat,
            residual_total: r.residual_total,
            entropy: e.entropy,
            entropy_production: r.entropy_production,
            min_det_p: e.min_det_p,
            zeta_violation: r.zeta_violation,
        }
    }

    fn values(&self) -> [f64; 14] {
        [
            self.t,
            self.kinetic,
            self.thermal,
            self.mechanical,
            self.boundary_spring,
            self.dissipation_cum,
            self.work_cum,
            self.flux_water_cum,
            self.flux_heat_cum,
            self.residual_total,
            self.entropy,
            self.entropy_production,
            self.min_det_p,
            self.zeta_violation,
        ]
    }

    fn from_values(v: &[f64]) -> Self {
        LedgerCsvRow {
            t: v[0],
            kinetic: v[1],
            thermal: v[2],
            mechanical: v[3],
            boundary_spring: v[4],
            dissipation_cum: v[5],
            work_cum: v[6],
            flux_water_cum: v[7],
            flux_heat_cum: v[8],
            residual_total: v[9],
            entropy: v[10],
            entropy_production: v[11],
            min_det_p: v[12],
            zeta_violation: v[13],
        }
    }
}

fn csv_line(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        // Shortest round-trip representation.
        let _ = write!(s, "{v:e}");
    }
    s.push('\n');
    s
}

/// `ledger.csv` contents; an empty ledger gives the header only.
pub fn write_ledger_csv(rows: &[LedgerRow]) -> String {
    let mut out = format!("{LEDGER_HEADER}\n");
    for r in rows {
        out.push_str(&csv_line(&LedgerCsvRow::from_row(r).values()));
    }
    out
}

fn bad(what: &str, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse { line, column: 1, message: format!("{what}: {msg}") }
}

pub fn read_ledger_csv(text: &str) -> Result<Vec<LedgerCsvRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(LEDGER_HEADER) {
        return Err(bad("ledger.csv", 1, "unexpected header"));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad("ledger.csv", k + 2, e))?;
        if v.len() != 14 {
            return Err(bad("ledger.csv", k + 2, format!("expected 14 columns, got {}", v.len())));
        }
        rows.push(LedgerCsvRow::from_values(&v));
    }
    Ok(rows)
}

/// Header names and numeric rows of a comma-separated table.
pub fn read_csv_table(text: &str, what: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(what, k + 2, e))?;
        if v.len() != header.len() {
            return Err(bad(what, k + 2, format!("expected {} columns, got {}", header.len(), v.len())));
        }
        rows.push(v);
    }
    Ok((header, rows))
}

fn detail_csv(rows: &[LedgerRow]) -> String {
    let mut out = format!("{DETAIL_HEADER}\n");
    for r in rows {
        let e = &r.energies;
        let c = &r.cumulative;
        out.push_str(&csv_line(&[
            r.t,
            r.step as f64,
            e.stored,
            e.barrier,
            e.bending,
            e.plastic_gradient,
            e.damage_gradient,
            e.porosity_gradient,
            e.water_gradient,
            e.penalty,
            c.heat,
            c.work_gravity,
            c.work_spring,
            r.entropy_production_min,
            r.min_vartheta,
        ]));
    }
    out
}

/// Nodal fields on the `(nx+1) × (ny+1)` grid, each stored row-major
/// (x fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub t: f64,
    pub fields: Vec<(String, Vec<f64>)>,
}

fn hermite_block(v: &[f64], n: usize, comp: usize, k: usize) -> Vec<f64> {
    (0..n).map(|i| v[i * Y_DOFS_PER_NODE + comp * 4 + k]).collect()
}

impl Snapshot {
    pub fn from_state(sp: &GalerkinSpace, s: &State, names: &[String]) -> Self {
        let n = sp.n_nodes();
        let fields = SNAPSHOT_FIELDS
            .iter()
            .enumerate()
            .filter(|(_, name)| names.iter().any(|m| m == *name))
            .map(|(idx, name)| {
                let data = match idx {
                    0..=7 => hermite_block(&s.y, n, idx / 4, idx % 4),
                    8..=15 => hermite_block(&s.v, n, (idx - 8) / 4, idx % 4),
                    16..=19 => s.p[idx - 16].clone(),
                    20 => s.alpha.clone(),
                    21 => s.phi.clone(),
                    22 => s.zeta.clone(),
                    23 => s.mu.clone(),
                    24 => s.vartheta.clone(),
                    _ => s.phi0.clone(),
                };
                (name.to_string(), data)
            })
            .collect();
        Snapshot { nx: sp.grid.nx, ny: sp.grid.ny, dx: sp.grid.dx, dy: sp.grid.dy, t: s.t, fields }
    }

    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Reassembles the full state; every field must be present.
    pub fn to_state(&self) -> Result<State> {
        let n = (self.nx + 1) * (self.ny + 1);
        let get = |name: &str| {
            self.field(name)
                .map(|v| v.to_vec())
                .ok_or_else(|| Error::Validation(format!("snapshot lacks field `{name}`")))
        };
        let mut y = vec![0.0; n * Y_DOFS_PER_NODE];
        let mut v = vec![0.0; n * Y_DOFS_PER_NODE];
        for (idx, name) in SNAPSHOT_FIELDS[..16].iter().enumerate() {
            let (target, base) = if idx < 8 { (&mut y, idx) } else { (&mut v, idx - 8) };
            let data = get(name)?;
            for i in 0..n {
                target[i * Y_DOFS_PER_NODE + base] = data[i];
            }
        }
        Ok(State {
            t: self.t,
            y,
            v,
            p: vec![get("p11")?, get("p12")?, get("p21")?, get("p22")?],
            alpha: get("alpha")?,
            phi: get("phi")?,
            zeta: get("zeta")?,
            mu: get("mu")?,
            vartheta: get("vartheta")?,
            phi0: get("phi0")?,
        })
    }
}

/// Header `nx ny dx dy t field_count`, then one block of `ny+1` lines with
/// `nx+1` values per field.
pub fn write_snapshot(s: &Snapshot) -> String {
    let mut out = format!("{} {} {:e} {:e} {:e} {}\n", s.nx, s.ny, s.dx, s.dy, s.t, s.fields.len());
    for (_, data) in &s.fields {
        for row in data.chunks(s.nx + 1) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

/// Parses a snapshot whose blocks are named by `names` in file order.
pub fn read_snapshot(text: &str, names: &[String]) -> Result<Snapshot> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if header.len() != 6 {
        return Err(bad("snapshot", 1, "header needs `nx ny dx dy t field_count`"));
    }
    let num = |i: usize| header[i].parse::<f64>().map_err(|e| bad("snapshot", 1, e));
    let int = |i: usize| header[i].parse::<usize>().map_err(|e| bad("snapshot", 1, e));
    let (nx, ny, count) = (int(0)?, int(1)?, int(5)?);
    if count != names.len() {
        return Err(bad("snapshot", 1, format!("{count} fields in file, {} names given", names.len())));
    }
    let mut fields = Vec::with_capacity(count);
    let mut line_no = 1;
    for name in names {
        let mut data = Vec::with_capacity((nx + 1) * (ny + 1));
        for _ in 0..=ny {
            line_no += 1;
            let line = lines.next().ok_or_else(|| bad("snapshot", line_no, "truncated"))?;
            for tok in line.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|e| bad("snapshot", line_no, e))?);
            }
        }
        if data.len() != (nx + 1) * (ny + 1) {
            return Err(bad("snapshot", line_no, format!("field `{name}` has {} values", data.len())));
        }
        fields.push((name.clone(), data));
    }
    Ok(Snapshot { nx, ny, dx: num(2)?, dy: num(3)?, t: num(4)?, fields })
}

pub fn snapshot_file_name(k: usize) -> String {
    format!("snapshot_{k:05}.txt")
}

/// Contents of `run_manifest.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub code_version: String,
    pub seed: u64,
    pub steps: usize,
    pub rejections: usize,
    /// Field names of the snapshot blocks, in file order.
    pub fields: Vec<String>,
    pub snapshots: Vec<String>,
    pub snapshot_times: Vec<f64>,
    pub config: ScenarioConfig,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| bad("run_manifest.toml", 0, e.message()))
}

/// Writes `ledger.csv`, `ledger_detail.csv`, the snapshots and
/// `run_manifest.toml` into `dir`.
pub fn write_outputs(traj: &Trajectory, cfg: &ScenarioConfig, sp: &GalerkinSpace, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("ledger.csv"), write_ledger_csv(&traj.ledger))?;
    std::fs::write(dir.join("ledger_detail.csv"), detail_csv(&traj.ledger))?;
    let names: Vec<String> =
        SNAPSHOT_FIELDS.iter().filter(|f| cfg.outputs.fields.iter().any(|m| m == *f)).map(|f| f.to_string()).collect();
    let mut files = Vec::new();
    for (k, s) in traj.snapshots.iter().enumerate() {
        let name = snapshot_file_name(k);
        std::fs::write(dir.join(&name), write_snapshot(&Snapshot::from_state(sp, s, &names)))?;
        files.push(name);
    }
    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.outputs.seed,
        steps: traj.steps.len(),
        rejections: traj.rejections,
        fields: names,
        snapshots: files,
        snapshot_times: traj.snapshots.iter().map(|s| s.t).collect(),
        config: cfg.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Validation(e.to_string()))?;
    std::fs::write(dir.join("run_manifest.toml"), text)?;
    Ok(())
}
