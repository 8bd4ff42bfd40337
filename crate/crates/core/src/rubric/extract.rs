//! Physical parameters read off a parsed script.
//!
//! Every value is converted to a fixed unit: lengths in Å, times in ps,
//! temperatures in K, pressures in atm, velocities in Å/ps. Parameters
//! that are not set by the script are reported as absent, never defaulted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::parser::{AstCommand, AstScript, TypedArg};

/// Shape of the value an extractor produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueKind {
    Number,
    Word,
    Tuple,
    Words,
}

/// Extractor keys, their value shape and unit.
pub const EXTRACTORS: &[(&str, ValueKind, &str)] = &[
    ("lattice_style", ValueKind::Word, ""),
    ("lattice_constant", ValueKind::Number, "Å"),
    ("replication", ValueKind::Tuple, "cells"),
    ("boundary", ValueKind::Word, ""),
    ("ensemble_sequence", ValueKind::Words, ""),
    ("temp_start", ValueKind::Number, "K"),
    ("temp_stop", ValueKind::Number, "K"),
    ("pressure", ValueKind::Number, "atm"),
    ("tdamp", ValueKind::Number, "ps"),
    ("pdamp", ValueKind::Number, "ps"),
    ("timestep", ValueKind::Number, "ps"),
    ("run_steps", ValueKind::Number, "steps"),
    ("total_sim_time", ValueKind::Number, "ps"),
    ("thermostat_run_time", ValueKind::Number, "ps"),
    ("heating_rate", ValueKind::Number, "K/ps"),
    ("velocity_create_temp", ValueKind::Number, "K"),
    ("velocity_set_vector", ValueKind::Tuple, "Å/ps"),
    ("pair_style_word", ValueKind::Word, ""),
    ("projectile_cells", ValueKind::Tuple, "cells"),
    ("target_cells", ValueKind::Tuple, "cells"),
    ("gap_distance", ValueKind::Number, "Å"),
    ("region_extents", ValueKind::Tuple, "Å"),
];

pub fn extractor_kind(key: &str) -> Option<ValueKind> {
    EXTRACTORS.iter().find(|(k, _, _)| *k == key).map(|(_, v, _)| *v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Word(String),
    Tuple(Vec<f64>),
    Words(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extracted {
    pub value: Option<Value>,
    /// Indices of the commands the value was read from.
    pub sources: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Extracted {
    fn found(value: Value, mut sources: Vec<usize>) -> Self {
        sources.sort_unstable();
        sources.dedup();
        Extracted { value: Some(value), sources, note: None }
    }

    fn absent(note: impl Into<String>) -> Self {
        Extracted { value: None, sources: Vec::new(), note: Some(note.into()) }
    }

    fn absent_at(note: impl Into<String>, sources: Vec<usize>) -> Self {
        Extracted { value: None, sources, note: Some(note.into()) }
    }

    pub fn is_found(&self) -> bool {
        self.value.is_some()
    }

    pub fn number(&self) -> Option<f64> {
        match self.value {
            Some(Value::Number(v)) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub values: BTreeMap<String, Extracted>,
}

impl ParameterSet {
    pub fn get(&self, key: &str) -> Option<&Extracted> {
        self.values.get(key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Units {
    time_ps: f64,
    pressure_atm: f64,
    length_a: f64,
    velocity_aps: f64,
}

fn unit_system(name: &str) -> Option<Units> {
    match name {
        "metal" => Some(Units { time_ps: 1.0, pressure_atm: 1.0 / 1.01325, length_a: 1.0, velocity_aps: 1.0 }),
        "real" => Some(Units { time_ps: 1e-3, pressure_atm: 1.0, length_a: 1.0, velocity_aps: 1e3 }),
        "si" => Some(Units { time_ps: 1e12, pressure_atm: 1.0 / 101_325.0, length_a: 1e10, velocity_aps: 1e-2 }),
        "cgs" => Some(Units { time_ps: 1e12, pressure_atm: 1.0 / 1_013_250.0, length_a: 1e8, velocity_aps: 1e-4 }),
        _ => None,
    }
}

const CUBIC_LATTICES: &[&str] = &["sc", "bcc", "fcc", "diamond"];
const INTEGRATORS: &[&str] = &["nve", "nvt", "npt", "nph", "nve/limit", "nvt/sllod", "rigid/nve", "rigid"];
const THERMOSTATS: &[&str] =
    &["nvt", "npt", "nvt/sllod", "langevin", "temp/berendsen", "temp/rescale", "temp/csvr", "temp/csld"];
/// Low and high region corners in lattice cells, with source commands.
type CellBounds = ([f64; 3], [f64; 3], Vec<usize>);

const BAROSTAT_KEYS: &[&str] = &["iso", "aniso", "tri", "x", "y", "z"];

#[derive(Debug, Clone)]
struct Lattice {
    index: usize,
    style: String,
    scale: f64,
    spacing: Option<[f64; 3]>,
    note: Option<String>,
}

#[derive(Debug, Clone)]
struct Region {
    index: usize,
    /// Bounds in the region's own units; `None` for INF/EDGE.
    lo: [Option<f64>; 3],
    hi: [Option<f64>; 3],
    box_units: bool,
}

#[derive(Debug, Clone)]
enum GroupDef {
    Region(String),
    Types(Vec<i64>),
    Other,
}

#[derive(Debug, Clone)]
struct Fix {
    id: String,
    index: usize,
}

#[derive(Debug, Clone)]
struct Run {
    index: usize,
    steps: i64,
    /// Steps over which a thermostat ramps its target (`start`/`stop` aware).
    ramp_steps: i64,
    dt: Option<(f64, usize)>,
    fixes: Vec<Fix>,
}

/// One linear pass collecting what the extractors need.
struct Scan<'a> {
    ast: &'a AstScript,
    units: Option<(String, usize)>,
    lattices: Vec<Lattice>,
    regions: BTreeMap<String, Region>,
    groups: BTreeMap<String, (usize, GroupDef)>,
    created_in: Vec<(i64, String, usize)>,
    box_region: Option<(String, usize)>,
    replicate: Option<([f64; 3], usize)>,
    boundary: Option<(String, usize)>,
    runs: Vec<Run>,
    velocity_create: Option<(f64, usize)>,
    velocity_set: Option<usize>,
    pair_style: Option<(String, usize)>,
}

fn num(arg: Option<&TypedArg>) -> Option<f64> {
    arg.and_then(TypedArg::as_f64)
}

fn kw_num(cmd: &AstCommand, keyword: &str, i: usize) -> Option<f64> {
    cmd.keyword(keyword).and_then(|k| num(k.args.get(i)))
}

fn is_kim_interactions(cmd: &AstCommand) -> bool {
    cmd.name == "kim_interactions"
        || (cmd.name == "kim" && cmd.arg("subcommand").map(|a| a.word()) == Some("interactions"))
}

impl<'a> Scan<'a> {
    fn new(ast: &'a AstScript) -> Self {
        let mut s = Scan {
            ast,
            units: None,
            lattices: Vec::new(),
            regions: BTreeMap::new(),
            groups: BTreeMap::new(),
            created_in: Vec::new(),
            box_region: None,
            replicate: None,
            boundary: None,
            runs: Vec::new(),
            velocity_create: None,
            velocity_set: None,
            pair_style: None,
        };
        s.walk();
        s
    }

    fn walk(&mut self) {
        let mut fixes: Vec<Fix> = Vec::new();
        let mut dt: Option<(f64, usize)> = None;
        let mut step: i64 = 0;
        for (i, cmd) in self.ast.commands.iter().enumerate() {
            match cmd.name.as_str() {
                "units" => {
                    if self.units.is_none() {
                        self.units = cmd.arg("style").map(|a| (a.word().to_string(), i));
                    }
                }
                "kim_init" | "kim" if cmd.arg("user_units").is_some() => {
                    if self.units.is_none() {
                        self.units = cmd.arg("user_units").map(|a| (a.word().to_string(), i));
                    }
                }
                "lattice" => self.lattices.push(lattice(i, cmd)),
                "region" => {
                    if let (Some(id), Some(r)) = (cmd.arg("id"), region(i, cmd)) {
                        self.regions.insert(id.word().to_string(), r);
                    }
                }
                "group" => {
                    let def = match cmd.style() {
                        Some("region") => cmd.arg("region").map(|r| GroupDef::Region(r.word().to_string())),
                        Some("type") => {
                            Some(GroupDef::Types(cmd.args_in("value").filter_map(|a| a.value.as_i64()).collect()))
                        }
                        _ => None,
                    };
                    if let Some(id) = cmd.arg("id") {
                        self.groups.insert(id.word().to_string(), (i, def.unwrap_or(GroupDef::Other)));
                    }
                }
                "create_box" => {
                    if self.box_region.is_none() {
                        self.box_region = cmd.arg("region").map(|r| (r.word().to_string(), i));
                    }
                }
                "create_atoms" => {
                    if let (Some(t), Some(r)) = (cmd.arg("type").and_then(|a| a.value.as_i64()), cmd.arg("region")) {
                        self.created_in.push((t, r.word().to_string(), i));
                    }
                }
                "replicate" => {
                    let f = [num(cmd.arg("nx")), num(cmd.arg("ny")), num(cmd.arg("nz"))];
                    if let [Some(x), Some(y), Some(z)] = f {
                        let prev = self.replicate.map(|(p, _)| p).unwrap_or([1.0; 3]);
                        self.replicate = Some(([prev[0] * x, prev[1] * y, prev[2] * z], i));
                    }
                }
                "boundary" => {
                    if self.boundary.is_none() {
                        let words: Vec<&str> = cmd.args.iter().map(|a| a.word()).collect();
                        self.boundary = Some((words.join(" "), i));
                    }
                }
                "timestep" => dt = num(cmd.arg("dt")).map(|v| (v, i)),
                "reset_timestep" => step = cmd.arg("n").and_then(|a| a.value.as_i64()).unwrap_or(step),
                "fix" => {
                    if let Some(id) = cmd.arg("id") {
                        let id = id.word().to_string();
                        let f = Fix { id: id.clone(), index: i };
                        match fixes.iter_mut().find(|f| f.id == id) {
                            Some(slot) => *slot = f,
                            None => fixes.push(f),
                        }
                    }
                }
                "unfix" => {
                    if let Some(id) = cmd.arg("fix_id") {
                        fixes.retain(|f| f.id != id.word());
                    }
                }
                "velocity" => match cmd.style() {
                    Some("create") if self.velocity_create.is_none() => {
                        self.velocity_create = num(cmd.arg("temp")).map(|t| (t, i));
                    }
                    Some("set") if self.velocity_set.is_none() => self.velocity_set = Some(i),
                    _ => {}
                },
                "pair_style" => self.pair_style = cmd.style().map(|s| (s.to_string(), i)),
                "run" => {
                    let n = cmd.arg("n").and_then(|a| a.value.as_i64()).unwrap_or(0);
                    let steps = if cmd.keyword("upto").is_some() { (n - step).max(0) } else { n };
                    let start = cmd.keyword("start").and_then(|k| k.args.first()).and_then(|a| a.value.as_i64());
                    let stop = cmd.keyword("stop").and_then(|k| k.args.first()).and_then(|a| a.value.as_i64());
                    let ramp_steps = match (start, stop) {
                        (Some(a), Some(b)) if b > a => b - a,
                        _ => steps,
                    };
                    step += steps;
                    self.runs.push(Run { index: i, steps, ramp_steps, dt, fixes: fixes.clone() });
                }
                _ => {
                    if is_kim_interactions(cmd) {
                        self.pair_style = Some(("kim".to_string(), i));
                    }
                }
            }
        }
    }

    fn cmd(&self, i: usize) -> &AstCommand {
        &self.ast.commands[i]
    }

    fn fix_style(&self, f: &Fix) -> &str {
        self.cmd(f.index).style().unwrap_or("")
    }

    fn units(&self) -> Result<(Units, Vec<usize>), Extracted> {
        match &self.units {
            Some((name, i)) => unit_system(name)
                .map(|u| (u, vec![*i]))
                .ok_or_else(|| Extracted::absent_at(format!("`units {name}` has no physical conversion"), vec![*i])),
            None => Err(Extracted::absent("no `units` command")),
        }
    }

    fn lattice_before(&self, index: usize) -> Option<&Lattice> {
        self.lattices.iter().rev().find(|l| l.index < index && l.style != "none")
    }

    fn first_lattice(&self) -> Option<&Lattice> {
        self.lattices.iter().find(|l| l.style != "none")
    }

    /// Lattice spacings in Å in effect at `index`.
    fn spacing_at(&self, index: usize) -> Result<([f64; 3], usize), String> {
        let lat = self.lattice_before(index).ok_or("no lattice defined before use of lattice units")?;
        if let Some(note) = &lat.note {
            return Err(note.clone());
        }
        let s = lat.spacing.ok_or("lattice spacing is not known for this lattice style")?;
        let (u, _) = self.units().map_err(|e| e.note.unwrap_or_default())?;
        Ok(([s[0] * u.length_a, s[1] * u.length_a, s[2] * u.length_a], lat.index))
    }

    /// Region bounds in lattice cells, resolving EDGE/INF against the box.
    fn region_cells(&self, name: &str) -> Result<CellBounds, String> {
        let r = self.regions.get(name).ok_or_else(|| format!("region `{name}` is not a block region"))?;
        let mut sources = vec![r.index];
        let (spacing, lat_index) = self.spacing_at(r.index)?;
        sources.push(lat_index);
        let (u, usrc) = self.units().map_err(|e| e.note.unwrap_or_default())?;
        let to_cells = |v: f64, d: usize| if r.box_units { v * u.length_a / spacing[d] } else { v };
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        let box_cells = match &self.box_region {
            Some((b, _)) if b != name => Some(self.region_cells(b)?),
            _ => None,
        };
        for d in 0..3 {
            lo[d] = match (r.lo[d], &box_cells) {
                (Some(v), _) => to_cells(v, d),
                (None, Some((blo, _, bs))) => {
                    sources.extend(bs);
                    blo[d]
                }
                (None, None) => return Err(format!("region `{name}` has an unbounded side")),
            };
            hi[d] = match (r.hi[d], &box_cells) {
                (Some(v), _) => to_cells(v, d),
                (None, Some((_, bhi, bs))) => {
                    sources.extend(bs);
                    bhi[d]
                }
                (None, None) => return Err(format!("region `{name}` has an unbounded side")),
            };
        }
        if r.box_units {
            sources.extend(usrc);
        }
        Ok((lo, hi, sources))
    }

    /// Region a group occupies, through `group ... region` or a typed
    /// `create_atoms ... region`.
    fn group_region(&self, group: &str) -> Option<(String, Vec<usize>)> {
        let (gi, def) = self.groups.get(group)?;
        match def {
            GroupDef::Region(r) => Some((r.clone(), vec![*gi])),
            GroupDef::Types(types) => {
                self.created_in.iter().find(|(t, _, _)| types.contains(t)).map(|(_, r, ci)| (r.clone(), vec![*gi, *ci]))
            }
            GroupDef::Other => None,
        }
    }

    fn projectile(&self) -> Result<(String, String, Vec<usize>), String> {
        let vi = self.velocity_set.ok_or("no `velocity ... set` command selects a projectile")?;
        let group = self.cmd(vi).arg("group").map(|a| a.word().to_string()).unwrap_or_default();
        let (region, mut src) =
            self.group_region(&group).ok_or_else(|| format!("group `{group}` is not tied to a region"))?;
        src.push(vi);
        Ok((group, region, src))
    }

    fn target(&self, projectile_group: &str, projectile_region: &str) -> Result<(String, Vec<usize>), String> {
        let candidates: Vec<(&String, (String, Vec<usize>))> = self
            .groups
            .keys()
            .filter(|g| g.as_str() != projectile_group)
            .filter_map(|g| self.group_region(g).map(|r| (g, r)))
            .filter(|(_, (r, _))| r != projectile_region && self.regions.contains_key(r))
            .collect();
        let pick = candidates
            .iter()
            .find(|(g, _)| g.to_ascii_lowercase().contains("target"))
            .or(candidates.first())
            .ok_or("no second region-backed group to act as the target")?;
        Ok(pick.1.clone())
    }

    /// Runs with at least one step.
    fn active_runs(&self) -> impl Iterator<Item = &Run> {
        self.runs.iter().filter(|r| r.steps > 0)
    }

    /// The thermostat fix of the longest thermostatted run, with that run.
    fn principal_thermostat(&self) -> Option<(&Fix, &Run)> {
        let mut best: Option<(&Fix, &Run)> = None;
        for run in self.active_runs() {
            let Some(f) = run.fixes.iter().find(|f| THERMOSTATS.contains(&self.fix_style(f))) else { continue };
            if best.is_none_or(|(_, b)| run.steps > b.steps) {
                best = Some((f, run));
            }
        }
        best
    }

    /// First npt/nph fix active during a run, else the first one defined.
    fn barostat(&self) -> Option<(usize, &'static str)> {
        let in_runs = self.active_runs().flat_map(|r| r.fixes.iter().map(|f| f.index));
        let defined = self.ast.find("fix").map(|(i, _)| i);
        in_runs.chain(defined).find_map(|i| {
            let cmd = self.cmd(i);
            if !matches!(cmd.style(), Some("npt" | "nph")) {
                return None;
            }
            BAROSTAT_KEYS.iter().find(|k| cmd.keyword(k).is_some()).map(|k| (i, *k))
        })
    }
}

fn lattice(index: usize, cmd: &AstCommand) -> Lattice {
    let style = cmd.style().unwrap_or("none").to_string();
    let scale = num(cmd.arg("scale")).unwrap_or(1.0);
    let mut note = None;
    let orient_default = [("x", [1, 0, 0]), ("y", [0, 1, 0]), ("z", [0, 0, 1])];
    for k in cmd.keywords.iter().filter(|k| k.keyword == "orient") {
        let dim = k.args.first().map(|a| a.word()).unwrap_or("");
        let v: Vec<i64> = k.args[1..].iter().filter_map(|a| a.value.as_i64()).collect();
        let expected = orient_default.iter().find(|(d, _)| *d == dim).map(|(_, e)| e.to_vec());
        let g = v.iter().map(|x| x.abs()).fold(0, gcd);
        let reduced: Vec<i64> = v.iter().map(|x| if g > 0 { x / g } else { *x }).collect();
        if expected != Some(reduced) {
            note = Some("lattice uses a non-default orientation".to_string());
        }
    }
    let spacing = if let Some(k) = cmd.keyword("spacing") {
        let s: Vec<f64> = k.args.iter().filter_map(TypedArg::as_f64).collect();
        (s.len() == 3).then(|| [s[0] * scale, s[1] * scale, s[2] * scale])
    } else if CUBIC_LATTICES.contains(&style.as_str()) {
        Some([scale; 3])
    } else if style == "hcp" {
        Some([scale, scale * 3f64.sqrt(), scale * (8.0f64 / 3.0).sqrt()])
    } else {
        None
    };
    Lattice { index, style, scale, spacing, note }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn region(index: usize, cmd: &AstCommand) -> Option<Region> {
    if cmd.style() != Some("block") {
        return None;
    }
    let get = |slot: &str| num(cmd.arg(slot));
    let box_units = cmd.keyword("units").and_then(|k| k.args.first()).map(|a| a.word()) == Some("box");
    Some(Region {
        index,
        lo: [get("xlo"), get("ylo"), get("zlo")],
        hi: [get("xhi"), get("yhi"), get("zhi")],
        box_units,
    })
}

/// Target temperatures and damping of a thermostat fix, native units.
fn thermostat_params(cmd: &AstCommand) -> (Option<f64>, Option<f64>, Option<f64>) {
    match cmd.style() {
        Some("nvt" | "npt" | "nvt/sllod") => (kw_num(cmd, "temp", 0), kw_num(cmd, "temp", 1), kw_num(cmd, "temp", 2)),
        Some("temp/rescale") => (num(cmd.arg("tstart")), num(cmd.arg("tstop")), None),
        _ => (num(cmd.arg("tstart")), num(cmd.arg("tstop")), num(cmd.arg("damp"))),
    }
}

fn run_time(run: &Run, steps: i64, u: &Units) -> Option<(f64, Vec<usize>)> {
    run.dt.map(|(dt, di)| (steps as f64 * dt * u.time_ps, vec![run.index, di]))
}

/// Read every known parameter from `ast`.
pub fn extract_parameters(ast: &AstScript) -> ParameterSet {
    let scan = Scan::new(ast);
    let mut out = BTreeMap::new();
    let mut put = |k: &str, e: Extracted| {
        out.insert(k.to_string(), e);
    };
    let units = scan.units();

    // Lattice.
    match scan.first_lattice() {
        Some(l) => {
            put("lattice_style", Extracted::found(Value::Word(l.style.clone()), vec![l.index]));
            put(
                "lattice_constant",
                match &units {
                    Ok((u, us)) => {
                        let mut s = vec![l.index];
                        s.extend(us);
                        Extracted::found(Value::Number(l.scale * u.length_a), s)
                    }
                    Err(e) => e.clone(),
                },
            );
        }
        None => {
            put("lattice_style", Extracted::absent("no `lattice` command"));
            put("lattice_constant", Extracted::absent("no `lattice` command"));
        }
    }

    // Box geometry.
    let box_cells = match &scan.box_region {
        Some((name, ci)) => scan.region_cells(name).map(|(lo, hi, mut s)| {
            s.push(*ci);
            (lo, hi, s)
        }),
        None => Err("no `create_box` command".to_string()),
    };
    put(
        "replication",
        match &box_cells {
            Ok((lo, hi, s)) => {
                let (f, fs) = scan.replicate.map(|(f, i)| (f, vec![i])).unwrap_or(([1.0; 3], vec![]));
                let mut s = s.clone();
                s.extend(fs);
                Extracted::found(Value::Tuple((0..3).map(|d| (hi[d] - lo[d]) * f[d]).collect()), s)
            }
            Err(e) => Extracted::absent(e.clone()),
        },
    );
    put(
        "region_extents",
        match &box_cells {
            Ok((lo, hi, s)) => match scan.spacing_at(s[0] + 1) {
                Ok((sp, li)) => {
                    let mut s = s.clone();
                    s.push(li);
                    let v = (0..3).flat_map(|d| [lo[d] * sp[d], hi[d] * sp[d]]).collect();
                    Extracted::found(Value::Tuple(v), s)
                }
                Err(e) => Extracted::absent(e),
            },
            Err(e) => Extracted::absent(e.clone()),
        },
    );
    put(
        "boundary",
        match &scan.boundary {
            Some((b, i)) => Extracted::found(Value::Word(b.clone()), vec![*i]),
            None => Extracted::absent("no `boundary` command"),
        },
    );

    // Runs and ensembles.
    let mut sequence: Vec<String> = Vec::new();
    let mut seq_sources = Vec::new();
    for run in scan.active_runs() {
        let mut styles: Vec<&str> = Vec::new();
        for f in &run.fixes {
            let s = scan.fix_style(f);
            if INTEGRATORS.contains(&s) && !styles.contains(&s) {
                styles.push(s);
                seq_sources.push(f.index);
            }
        }
        if styles.is_empty() {
            continue;
        }
        seq_sources.push(run.index);
        let word = styles.join("+");
        if sequence.last() != Some(&word) {
            sequence.push(word);
        }
    }
    put(
        "ensemble_sequence",
        if sequence.is_empty() {
            Extracted::absent("no integrator is active during any run")
        } else {
            Extracted::found(Value::Words(sequence), seq_sources)
        },
    );

    let runs: Vec<&Run> = scan.active_runs().collect();
    put(
        "run_steps",
        if runs.is_empty() {
            Extracted::absent("no `run` command")
        } else {
            Extracted::found(
                Value::Number(runs.iter().map(|r| r.steps as f64).sum()),
                runs.iter().map(|r| r.index).collect(),
            )
        },
    );
    put(
        "total_sim_time",
        match (&units, runs.is_empty()) {
            (_, true) => Extracted::absent("no `run` command"),
            (Err(e), _) => e.clone(),
            (Ok((u, us)), _) => {
                let mut total = 0.0;
                let mut src = us.clone();
                let mut missing = None;
                for r in &runs {
                    match run_time(r, r.steps, u) {
                        Some((t, s)) => {
                            total += t;
                            src.extend(s);
                        }
                        None => missing = Some(r.index),
                    }
                }
                match missing {
                    Some(i) => Extracted::absent_at("a run has no `timestep` in effect", vec![i]),
                    None => Extracted::found(Value::Number(total), src),
                }
            }
        },
    );

    // Principal thermostat.
    let principal = scan.principal_thermostat();
    match (principal, &units) {
        (None, _) => {
            for k in ["temp_start", "temp_stop", "tdamp", "heating_rate", "thermostat_run_time"] {
                put(k, Extracted::absent("no thermostat is active during any run"));
            }
        }
        (Some((fix, run)), units) => {
            let cmd = scan.cmd(fix.index);
            let (t0, t1, damp) = thermostat_params(cmd);
            let at = |v: Option<f64>, what: &str| match v {
                Some(v) => Extracted::found(Value::Number(v), vec![fix.index, run.index]),
                None => Extracted::absent_at(format!("thermostat has no {what}"), vec![fix.index]),
            };
            put("temp_start", at(t0, "start temperature"));
            put("temp_stop", at(t1, "stop temperature"));
            match units {
                Err(e) => {
                    for k in ["tdamp", "heating_rate", "thermostat_run_time"] {
                        put(k, e.clone());
                    }
                }
                Ok((u, us)) => {
                    put(
                        "tdamp",
                        match damp {
                            Some(d) => {
                                let mut s = vec![fix.index];
                                s.extend(us);
                                Extracted::found(Value::Number(d * u.time_ps), s)
                            }
                            None => Extracted::absent_at("thermostat has no damping time", vec![fix.index]),
                        },
                    );
                    put(
                        "heating_rate",
                        match (t0, t1, run_time(run, run.ramp_steps, u)) {
                            (Some(a), Some(b), Some((t, mut s))) if t > 0.0 => {
                                s.push(fix.index);
                                s.extend(us);
                                Extracted::found(Value::Number((b - a) / t), s)
                            }
                            _ => Extracted::absent_at("ramp duration or temperatures unknown", vec![fix.index]),
                        },
                    );
                    let mut total = 0.0;
                    let mut src = vec![fix.index];
                    let mut ok = true;
                    for r in scan.active_runs().filter(|r| r.fixes.iter().any(|f| f.index == fix.index)) {
                        match run_time(r, r.steps, u) {
                            Some((t, s)) => {
                                total += t;
                                src.extend(s);
                            }
                            None => ok = false,
                        }
                    }
                    put(
                        "thermostat_run_time",
                        if ok {
                            Extracted::found(Value::Number(total), src)
                        } else {
                            Extracted::absent_at("a thermostatted run has no `timestep` in effect", vec![fix.index])
                        },
                    );
                }
            }
        }
    }

    // Barostat.
    match (scan.barostat(), &units) {
        (None, _) => {
            put("pressure", Extracted::absent("no barostat fix"));
            put("pdamp", Extracted::absent("no barostat fix"));
        }
        (Some(_), Err(e)) => {
            put("pressure", e.clone());
            put("pdamp", e.clone());
        }
        (Some((i, key)), Ok((u, us))) => {
            let cmd = scan.cmd(i);
            let mut s = vec![i];
            s.extend(us);
            let p = kw_num(cmd, key, 0).map(|p| p * u.pressure_atm);
            let d = kw_num(cmd, key, 2).map(|d| d * u.time_ps);
            put(
                "pressure",
                p.map_or_else(
                    || Extracted::absent("no target pressure"),
                    |p| Extracted::found(Value::Number(p), s.clone()),
                ),
            );
            put(
                "pdamp",
                d.map_or_else(|| Extracted::absent("no damping time"), |d| Extracted::found(Value::Number(d), s)),
            );
        }
    }

    // Timestep in effect for the principal run, else the first one given.
    let dt = principal
        .and_then(|(_, r)| r.dt)
        .or_else(|| scan.runs.iter().find_map(|r| r.dt))
        .or_else(|| ast.find("timestep").next().and_then(|(i, c)| num(c.arg("dt")).map(|v| (v, i))));
    put(
        "timestep",
        match (dt, &units) {
            (None, _) => Extracted::absent("no `timestep` command"),
            (Some(_), Err(e)) => e.clone(),
            (Some((v, i)), Ok((u, us))) => {
                let mut s = vec![i];
                s.extend(us);
                Extracted::found(Value::Number(v * u.time_ps), s)
            }
        },
    );

    // Velocities.
    put(
        "velocity_create_temp",
        match scan.velocity_create {
            Some((t, i)) => Extracted::found(Value::Number(t), vec![i]),
            None => Extracted::absent("no `velocity ... create` command"),
        },
    );
    put("velocity_set_vector", velocity_set(&scan));

    put(
        "pair_style_word",
        match &scan.pair_style {
            Some((w, i)) => Extracted::found(Value::Word(w.clone()), vec![*i]),
            None => Extracted::absent("no `pair_style` or `kim interactions` command"),
        },
    );

    // Impact geometry.
    match scan.projectile() {
        Err(e) => {
            for k in ["projectile_cells", "target_cells", "gap_distance"] {
                put(k, Extracted::absent(e.clone()));
            }
        }
        Ok((group, pregion, psrc)) => {
            let proj = scan.region_cells(&pregion);
            put("projectile_cells", cells(&proj, &psrc));
            match scan.target(&group, &pregion) {
                Err(e) => {
                    put("target_cells", Extracted::absent(e.clone()));
                    put("gap_distance", Extracted::absent(e));
                }
                Ok((tregion, tsrc)) => {
                    let targ = scan.region_cells(&tregion);
                    put("target_cells", cells(&targ, &tsrc));
                    put("gap_distance", gap(&scan, &proj, &targ, &psrc, &tsrc, &pregion));
                }
            }
        }
    }

    ParameterSet { values: out }
}

type Cells = Result<([f64; 3], [f64; 3], Vec<usize>), String>;

fn cells(r: &Cells, extra: &[usize]) -> Extracted {
    match r {
        Ok((lo, hi, s)) => {
            let mut s = s.clone();
            s.extend(extra);
            Extracted::found(Value::Tuple((0..3).map(|d| hi[d] - lo[d]).collect()), s)
        }
        Err(e) => Extracted::absent(e.clone()),
    }
}

/// Separation along z between the projectile and target blocks, in Å.
fn gap(scan: &Scan, proj: &Cells, targ: &Cells, psrc: &[usize], tsrc: &[usize], pregion: &str) -> Extracted {
    let (Ok((plo, phi, ps)), Ok((tlo, thi, ts))) = (proj, targ) else {
        return Extracted::absent("projectile or target extents unknown");
    };
    let index = scan.regions.get(pregion).map(|r| r.index).unwrap_or(0);
    let (spacing, li) = match scan.spacing_at(index + 1) {
        Ok(v) => v,
        Err(e) => return Extracted::absent(e),
    };
    let cells = if plo[2] >= thi[2] {
        plo[2] - thi[2]
    } else if tlo[2] >= phi[2] {
        tlo[2] - phi[2]
    } else {
        -((phi[2].min(thi[2])) - (plo[2].max(tlo[2])))
    };
    let mut s: Vec<usize> = ps.iter().chain(ts).chain(psrc).chain(tsrc).copied().collect();
    s.push(li);
    Extracted::found(Value::Number(cells * spacing[2]), s)
}

fn velocity_set(scan: &Scan) -> Extracted {
    let Some(i) = scan.velocity_set else {
        return Extracted::absent("no `velocity ... set` command");
    };
    let cmd = scan.cmd(i);
    let (u, us) = match scan.units() {
        Ok(v) => v,
        Err(e) => return e,
    };
    let comps: Vec<f64> =
        ["vx", "vy", "vz"].iter().map(|s| cmd.arg(s).and_then(TypedArg::as_f64).unwrap_or(0.0)).collect();
    let lattice_units = cmd.keyword("units").and_then(|k| k.args.first()).map(|a| a.word()) != Some("box");
    let mut s = vec![i];
    s.extend(us);
    let scale = if lattice_units {
        match scan.spacing_at(i) {
            Ok((sp, li)) => {
                s.push(li);
                // spacing_at already converts to Å; velocities are per unit time.
                [sp[0] / u.length_a, sp[1] / u.length_a, sp[2] / u.length_a]
            }
            Err(e) => return Extracted::absent_at(e, vec![i]),
        }
    } else {
        [1.0; 3]
    };
    let v = (0..3).map(|d| comps[d] * scale[d] * u.velocity_aps).collect();
    Extracted::found(Value::Tuple(v), s)
}
