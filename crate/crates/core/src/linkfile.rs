//! Plain-text link files.
//!
//! ```text
//! # name = sdt
//! # node_count = 3
//! # horizon_days = 1
//! # delta_s = 10800
//! # dt_s = 300
//! 0,1,0,100,10,150
//! ```
//!
//! Header lines are `# key = value`; unknown keys are kept as extra metadata.
//! Each record is `host,nbr,t_s,t_l,t_s',t_l'` in integer seconds.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::network::{Link, Network, NetworkError};

#[derive(Debug, Error)]
pub enum LinkFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing header key `{0}`")]
    MissingKey(&'static str),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Writes `extra` header pairs first, then the network metadata and links.
pub fn write_network<W: Write>(
    mut w: W,
    net: &Network,
    extra: &[(String, String)],
) -> io::Result<()> {
    for (k, v) in extra {
        writeln!(w, "# {k} = {v}")?;
    }
    writeln!(w, "# name = {}", net.name)?;
    writeln!(w, "# node_count = {}", net.node_count)?;
    writeln!(w, "# horizon_days = {}", net.horizon_days)?;
    writeln!(w, "# delta_s = {}", net.delta_s)?;
    writeln!(w, "# dt_s = {}", net.dt_s)?;
    for l in net.links() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            l.host, l.neighbor, l.host_arrive, l.host_depart, l.nbr_arrive, l.nbr_depart
        )?;
    }
    Ok(())
}

/// Parses a link file, returning the network and any extra header pairs.
pub fn read_network<R: BufRead>(r: R) -> Result<(Network, Vec<(String, String)>), LinkFileError> {
    let mut name = None;
    let mut node_count = None;
    let mut horizon = None;
    let mut delta = None;
    let mut dt = None;
    let mut extra = Vec::new();
    let mut links = Vec::new();

    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let perr = |msg: String| LinkFileError::Parse { line: lineno, msg };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(h) = trimmed.strip_prefix('#') {
            let Some((k, v)) = h.split_once('=') else { continue };
            let (k, v) = (k.trim(), v.trim());
            let num = |v: &str| v.parse::<u64>().map_err(|e| perr(format!("{k}: {e}")));
            match k {
                "name" => name = Some(v.to_string()),
                "node_count" => node_count = Some(num(v)? as u32),
                "horizon_days" => horizon = Some(num(v)? as u32),
                "delta_s" => delta = Some(num(v)?),
                "dt_s" => dt = Some(num(v)?),
                _ => extra.push((k.to_string(), v.to_string())),
            }
            continue;
        }
        let mut f = [0u64; 6];
        let mut parts = trimmed.split(',');
        for slot in f.iter_mut() {
            let p = parts.next().ok_or_else(|| perr("expected 6 fields".into()))?;
            *slot = p.trim().parse().map_err(|e| perr(format!("`{p}`: {e}")))?;
        }
        if parts.next().is_some() {
            return Err(perr("expected 6 fields".into()));
        }
        links.push(Link::new(f[0] as u32, f[1] as u32, f[2], f[3], f[4], f[5]));
    }

    let net = Network::new(
        name.unwrap_or_default(),
        node_count.ok_or(LinkFileError::MissingKey("node_count"))?,
        horizon.ok_or(LinkFileError::MissingKey("horizon_days"))?,
        delta.ok_or(LinkFileError::MissingKey("delta_s"))?,
        dt.unwrap_or(300),
        links,
    )?;
    Ok((net, extra))
}
