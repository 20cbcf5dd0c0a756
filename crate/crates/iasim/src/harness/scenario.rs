//! Human-writable scenario files.
//!
//! One `key = value` pair per line, `#` comments. Lists are whitespace or
//! comma separated. The CSIT grid is given as 1-based entries
//! `A.i.k.j = value` (accuracy of TX `j`'s estimate of the link from TX `k`
//! to RX `i`) over a fallback `A.default`; `inf` marks a perfectly known
//! link.
//!
//! ```text
//! K = 3
//! M = 4
//! N = 4
//! d = 2
//! snr_grid_db = 0 10 20 30 40 50 60
//! trials = 2000
//! seed = 7
//! csit = gaussian
//! receiver = perfect_ia
//! error_norm = unit
//! A.default = 1.0
//! A.3.2.2 = 0.5
//! A.3.2.3 = 0.0
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::channel::Dims;
use crate::csit::{CsitModel, CsitProfile, ErrorNorm};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum CsitConfig {
    Perfect,
    Profile(CsitProfile),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receiver {
    PerfectIa,
    Mmse,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub dims: Dims,
    pub snr_grid_db: Vec<f64>,
    pub trials: u64,
    pub csit: CsitConfig,
    pub receiver: Receiver,
    pub seed: u64,
    pub filter_eps: Option<f64>,
    pub error_norm: ErrorNorm,
}

impl Scenario {
    /// The repo's default setting: 3 users, `M = N = 4`, `d = 2`, 0-60 dB in
    /// 10 dB steps, 2000 trials, with the heterogeneous accuracy profile
    /// where TX3 knows nothing about the link from TX2 to RX3 and TX2 knows
    /// it at half accuracy.
    pub fn golden() -> Self {
        let mut profile = CsitProfile::uniform(3, 1.0, CsitModel::Gaussian);
        profile.a[2][1][1] = 0.5;
        profile.a[2][1][2] = 0.0;
        Self {
            dims: Dims::square3(2),
            snr_grid_db: (0..=6).map(|i| (i * 10) as f64).collect(),
            trials: 2000,
            csit: CsitConfig::Profile(profile),
            receiver: Receiver::PerfectIa,
            seed: 20240601,
            filter_eps: None,
            error_norm: ErrorNorm::Unit,
        }
    }

    pub fn with_csit(mut self, csit: CsitConfig) -> Self {
        self.csit = csit;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidScenario("trials must be >= 1".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScenario(
                "snr_grid_db must be strictly increasing".into(),
            ));
        }
        if !self.dims.is_square3() {
            return Err(Error::InvalidScenario(
                "the closed-form solver needs K = 3 with M = N = 2d".into(),
            ));
        }
        if let CsitConfig::Profile(p) = &self.csit {
            p.validate(self.dims.k)?;
        }
        if let Some(eps) = self.filter_eps {
            if !(eps >= 0.0) {
                return Err(Error::InvalidScenario("filter_eps must be >= 0".into()));
            }
        }
        Ok(())
    }

    /// Canonical one-line-per-field rendering, used for the result digest.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "K = {}", self.dims.k);
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s, "M = {}", join(&self.dims.m));
        let _ = writeln!(s, "N = {}", join(&self.dims.n));
        let _ = writeln!(s, "d = {}", join(&self.dims.d));
        let _ = writeln!(
            s,
            "snr_grid_db = {}",
            self.snr_grid_db
                .iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(" ")
        );
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(
            s,
            "receiver = {}",
            match self.receiver {
                Receiver::PerfectIa => "perfect_ia",
                Receiver::Mmse => "mmse",
            }
        );
        let _ = writeln!(
            s,
            "error_norm = {}",
            match self.error_norm {
                ErrorNorm::Unit => "unit",
                ErrorNorm::PerEntry => "per_entry",
            }
        );
        if let Some(eps) = self.filter_eps {
            let _ = writeln!(s, "filter_eps = {eps}");
        }
        match &self.csit {
            CsitConfig::Perfect => {
                let _ = writeln!(s, "csit = perfect");
            }
            CsitConfig::Profile(p) => {
                let _ = writeln!(
                    s,
                    "csit = {}",
                    match p.model {
                        CsitModel::Gaussian => "gaussian",
                        CsitModel::Rvq => "rvq",
                    }
                );
                let _ = writeln!(s, "C = {}", p.c);
                for i in 0..self.dims.k {
                    for k in 0..self.dims.k {
                        for j in 0..self.dims.k {
                            let _ =
                                writeln!(s, "A.{}.{}.{} = {}", i + 1, k + 1, j + 1, p.a[i][k][j]);
                        }
                    }
                }
            }
        }
        s
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    match v {
        "inf" | "Inf" | "INF" => Ok(f64::INFINITY),
        _ => v
            .parse::<f64>()
            .map_err(|_| Error::InvalidScenario(format!("bad number for {key}: {v:?}"))),
    }
}

fn parse_usize_list(key: &str, v: &str, k: usize) -> Result<Vec<usize>> {
    let items: Vec<usize> = v
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::InvalidScenario(format!("bad integer for {key}: {t:?}")))
        })
        .collect::<Result<_>>()?;
    match items.len() {
        1 => Ok(vec![items[0]; k]),
        n if n == k => Ok(items),
        n => Err(Error::InvalidScenario(format!(
            "{key} needs 1 or {k} values, got {n}"
        ))),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    let mut grid_entries: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut grid_default: Option<f64> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidScenario(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        if key == "A.default" {
            grid_default = Some(parse_f64(key, value)?);
        } else if let Some(rest) = key.strip_prefix("A.") {
            let idx: Vec<&str> = rest.split('.').collect();
            if idx.len() != 3 {
                return Err(Error::InvalidScenario(format!(
                    "line {}: CSIT entries look like A.i.k.j",
                    lineno + 1
                )));
            }
            let parse_idx = |t: &str| {
                t.parse::<usize>()
                    .ok()
                    .filter(|&x| x >= 1)
                    .ok_or_else(|| {
                        Error::InvalidScenario(format!("bad 1-based index {t:?} in {key}"))
                    })
            };
            grid_entries.push((
                parse_idx(idx[0])? - 1,
                parse_idx(idx[1])? - 1,
                parse_idx(idx[2])? - 1,
                parse_f64(key, value)?,
            ));
        } else {
            fields.insert(key.to_string(), value.to_string());
        }
    }

    let get = |k: &str| {
        fields
            .get(k)
            .ok_or_else(|| Error::InvalidScenario(format!("missing field {k}")))
    };
    let k_users: usize = get("K")?
        .parse()
        .map_err(|_| Error::InvalidScenario("bad K".into()))?;
    let dims = Dims::new(
        k_users,
        parse_usize_list("M", get("M")?, k_users)?,
        parse_usize_list("N", get("N")?, k_users)?,
        parse_usize_list("d", get("d")?, k_users)?,
    )?;

    let snr_grid_db: Vec<f64> = get("snr_grid_db")?
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| parse_f64("snr_grid_db", t))
        .collect::<Result<_>>()?;

    let trials: u64 = get("trials")?
        .parse()
        .map_err(|_| Error::InvalidScenario("bad trials".into()))?;
    let seed: u64 = get("seed")?
        .parse()
        .map_err(|_| Error::InvalidScenario("bad seed".into()))?;

    let receiver = match fields.get("receiver").map(String::as_str).unwrap_or("perfect_ia") {
        "perfect_ia" => Receiver::PerfectIa,
        "mmse" => Receiver::Mmse,
        other => {
            return Err(Error::InvalidScenario(format!(
                "receiver must be perfect_ia or mmse, got {other:?}"
            )))
        }
    };
    let error_norm = match fields.get("error_norm").map(String::as_str).unwrap_or("unit") {
        "unit" => ErrorNorm::Unit,
        "per_entry" => ErrorNorm::PerEntry,
        other => {
            return Err(Error::InvalidScenario(format!(
                "error_norm must be unit or per_entry, got {other:?}"
            )))
        }
    };
    let filter_eps = match fields.get("filter_eps") {
        Some(v) => Some(parse_f64("filter_eps", v)?),
        None => None,
    };

    let csit = match fields.get("csit").map(String::as_str).unwrap_or("perfect") {
        "perfect" => CsitConfig::Perfect,
        model @ ("gaussian" | "rvq") => {
            let model = if model == "gaussian" {
                CsitModel::Gaussian
            } else {
                CsitModel::Rvq
            };
            let default = grid_default.unwrap_or(1.0);
            let mut profile = CsitProfile::uniform(k_users, default, model);
            if let Some(c) = fields.get("C") {
                profile.c = parse_f64("C", c)?;
            }
            for (i, k, j, v) in &grid_entries {
                if *i >= k_users || *k >= k_users || *j >= k_users {
                    return Err(Error::InvalidScenario(format!(
                        "CSIT index A.{}.{}.{} out of range for K = {k_users}",
                        i + 1,
                        k + 1,
                        j + 1
                    )));
                }
                profile.a[*i][*k][*j] = *v;
            }
            CsitConfig::Profile(profile)
        }
        other => {
            return Err(Error::InvalidScenario(format!(
                "csit must be perfect, gaussian or rvq, got {other:?}"
            )))
        }
    };

    let scenario = Scenario {
        dims,
        snr_grid_db,
        trials,
        csit,
        receiver,
        seed,
        filter_eps,
        error_norm,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?)
}
