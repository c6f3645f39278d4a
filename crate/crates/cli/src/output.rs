//! CSV time series, snapshots and binary checkpoints.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cryoporo_core::diagnostics::DiagnosticsRecord;
use cryoporo_core::solver::FieldState;

use crate::error::CliError;

/// 17 significant digits.
fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn timeseries_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 400 + 256);
    out.push_str(DiagnosticsRecord::HEADER);
    out.push('\n');
    for r in records {
        let reals = [
            r.t,
            r.dt,
            r.energy_total,
            r.entropy_total,
            r.energy_residual,
            r.entropy_production,
            r.dissipation_total,
            r.mean_w,
            r.theta_min,
            r.theta_floor,
            r.chi_mean,
            r.p_min,
            r.p_max,
            r.h_constant,
        ];
        for v in reals {
            out.push_str(&real(v));
            out.push(',');
        }
        let _ = writeln!(out, "{},{}", r.newton_iters_p, r.newton_iters_theta);
    }
    out
}

pub fn snapshot_csv(x: &[f64], s: &FieldState) -> String {
    let mut out = String::from("x,p,w,chi,theta\n");
    for i in 0..x.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            real(x[i]),
            real(s.p[i]),
            real(s.w[i]),
            real(s.chi[i]),
            real(s.theta[i])
        );
    }
    out
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Writes `timeseries.csv` and `<prefix>_<i>.csv` for every snapshot.
pub fn write_run(
    dir: &Path,
    x: &[f64],
    records: Option<&[DiagnosticsRecord]>,
    snapshots: &[FieldState],
    prefix: &str,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    if let Some(rows) = records {
        write_file(&dir.join("timeseries.csv"), timeseries_csv(rows).as_bytes())?;
    }
    for (i, s) in snapshots.iter().enumerate() {
        write_file(
            &dir.join(format!("{prefix}_{i}.csv")),
            snapshot_csv(x, s).as_bytes(),
        )?;
    }
    Ok(())
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: [u8; 32],
    pub state: FieldState,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<FieldState>,
    pub next_snapshot: usize,
}

const MAGIC: &[u8; 8] = b"CRYOCKP1";

#[derive(Default)]
struct Enc(Vec<u8>);

impl Enc {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|x| self.f64(*x));
    }
    fn state(&mut self, s: &FieldState) {
        self.f64(s.t);
        for a in [&s.p, &s.w, &s.chi, &s.theta] {
            self.f64s(a);
        }
    }
    /// Appends `payload` as one length-prefixed record.
    fn record(&mut self, payload: Enc) {
        self.u64(payload.0.len() as u64);
        self.0.extend_from_slice(&payload.0);
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Dec<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or("truncated checkpoint")?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self) -> Result<usize, String> {
        let n = self.u64()? as usize;
        if n > self.buf.len() {
            return Err("corrupt length in checkpoint".into());
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>, String> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn state(&mut self) -> Result<FieldState, String> {
        Ok(FieldState {
            t: self.f64()?,
            p: self.f64s()?,
            w: self.f64s()?,
            chi: self.f64s()?,
            theta: self.f64s()?,
        })
    }
    fn record(&mut self) -> Result<Dec<'a>, String> {
        let n = self.len()?;
        Ok(Dec {
            buf: self.take(n)?,
            pos: 0,
        })
    }
    fn finish(&self) -> Result<(), String> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err("trailing bytes in checkpoint record".into())
        }
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Enc(MAGIC.to_vec());
        let mut hash = Enc::default();
        hash.0.extend_from_slice(&self.config_hash);
        out.record(hash);

        let mut state = Enc::default();
        state.state(&self.state);
        out.record(state);

        let mut rows = Enc::default();
        rows.u64(self.records.len() as u64);
        for r in &self.records {
            for v in [
                r.t,
                r.dt,
                r.energy_total,
                r.entropy_total,
                r.energy_residual,
                r.entropy_production,
                r.dissipation_total,
                r.mean_w,
                r.theta_min,
                r.theta_floor,
                r.chi_mean,
                r.p_min,
                r.p_max,
                r.h_constant,
            ] {
                rows.f64(v);
            }
            rows.u64(r.newton_iters_p as u64);
            rows.u64(r.newton_iters_theta as u64);
        }
        out.record(rows);

        let mut snaps = Enc::default();
        snaps.u64(self.snapshots.len() as u64);
        self.snapshots.iter().for_each(|s| snaps.state(s));
        snaps.u64(self.next_snapshot as u64);
        out.record(snaps);
        out.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        let mut d = Dec { buf: bytes, pos: 0 };
        if d.take(MAGIC.len())? != MAGIC {
            return Err("not a cryoporo checkpoint".into());
        }
        let mut h = d.record()?;
        let config_hash: [u8; 32] = h
            .take(32)?
            .try_into()
            .map_err(|_| "bad hash record".to_string())?;
        h.finish()?;

        let mut s = d.record()?;
        let state = s.state()?;
        s.finish()?;

        let mut r = d.record()?;
        let n = r.len()?;
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            let mut v = [0.0; 14];
            for x in v.iter_mut() {
                *x = r.f64()?;
            }
            records.push(DiagnosticsRecord {
                t: v[0],
                dt: v[1],
                energy_total: v[2],
                entropy_total: v[3],
                energy_residual: v[4],
                entropy_production: v[5],
                dissipation_total: v[6],
                mean_w: v[7],
                theta_min: v[8],
                theta_floor: v[9],
                chi_mean: v[10],
                p_min: v[11],
                p_max: v[12],
                h_constant: v[13],
                newton_iters_p: r.u64()? as usize,
                newton_iters_theta: r.u64()? as usize,
            });
        }
        r.finish()?;

        let mut sn = d.record()?;
        let n = sn.len()?;
        let snapshots = (0..n).map(|_| sn.state()).collect::<Result<Vec<_>, _>>()?;
        let next_snapshot = sn.u64()? as usize;
        sn.finish()?;
        d.finish()?;
        Ok(Self {
            config_hash,
            state,
            records,
            snapshots,
            next_snapshot,
        })
    }
}
