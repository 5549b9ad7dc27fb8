use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use opdyn::C64;

#[derive(Debug, Parser)]
#[command(
    name = "opdyn",
    version,
    about = "Orbit, spectral and semigroup analyses of bounded operators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags every command accepts. Unset tolerances and horizons fall back to
/// the command's own default.
#[derive(Debug, Args)]
pub struct Common {
    /// Operator document (JSON).
    #[arg(long, value_name = "PATH")]
    pub op: PathBuf,
    /// Report destination; stdout when absent. CSV traces go next to it.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "FLOAT")]
    pub tol: Option<f64>,
    #[arg(long, value_name = "INT")]
    pub horizon: Option<usize>,
    /// Seed for every sampled vector; decimal or 0x-prefixed hex.
    #[arg(long, value_name = "INT", default_value = "0x5EED", value_parser = parse_seed)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split into the peripheral part L and the decaying part X0.
    Decompose {
        #[command(flatten)]
        common: Common,
        /// Vectors to project onto L.
        #[arg(long, value_name = "PATH")]
        vec: Option<PathBuf>,
    },
    /// Orbit norms (and distances to a net) along T^n x.
    Orbit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        vec: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        net: Option<PathBuf>,
    },
    /// Powers n with ‖T^n a − a‖ <= tol, and the isometry check on the orbit span.
    Returning {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        vec: PathBuf,
    },
    /// Whether the net attracts every sampled orbit.
    Attractor {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        net: PathBuf,
        #[arg(long, value_name = "PATH")]
        vec: Option<PathBuf>,
    },
    /// Whether every sampled orbit comes back near the net.
    Occasional {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        net: PathBuf,
        #[arg(long, value_name = "PATH")]
        vec: Option<PathBuf>,
    },
    /// Approximate eigenvectors for a point of the spectrum.
    Weyl {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "RE,IM", value_parser = parse_lambda, allow_hyphen_values = true)]
        lambda: C64,
        #[arg(long, value_name = "INT", default_value_t = 8)]
        count: usize,
    },
    /// Look for an isometry orbit that escapes the net; exit 3 if none does.
    Falsify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        net: PathBuf,
        #[arg(long, value_name = "PATH")]
        vec: Option<PathBuf>,
    },
    /// Bound, semigroup law, swept nets and continuous-time attraction.
    Semigroup {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        net: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        vec: Option<PathBuf>,
        #[arg(long, value_name = "FLOAT")]
        dt: Option<f64>,
        /// Sample times for the attraction check.
        #[arg(long, value_name = "INT", default_value_t = 256)]
        count: usize,
    },
    /// Density of the scaled orbit of one candidate.
    Supercyclic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        vec: PathBuf,
        /// Random targets added to the coordinate directions.
        #[arg(long, value_name = "INT", default_value_t = 64)]
        targets: usize,
    },
    /// Density of the scaled orbits of a net.
    CompactSupercyclic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        net: PathBuf,
        #[arg(long, value_name = "INT", default_value_t = 64)]
        targets: usize,
    },
    /// Stage-by-stage run of the power-bounded supercyclic chain.
    Theorem4 {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        vec: PathBuf,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Decompose { common, .. }
            | Command::Orbit { common, .. }
            | Command::Returning { common, .. }
            | Command::Attractor { common, .. }
            | Command::Occasional { common, .. }
            | Command::Weyl { common, .. }
            | Command::Falsify { common, .. }
            | Command::Semigroup { common, .. }
            | Command::Supercyclic { common, .. }
            | Command::CompactSupercyclic { common, .. }
            | Command::Theorem4 { common, .. } => common,
        }
    }
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {s:?}: {e}"))
}

fn parse_lambda(s: &str) -> Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| {
        p.parse::<f64>()
            .map_err(|e| format!("invalid number {p:?}: {e}"))
    };
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected RE or RE,IM, got {s:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_accept_hex() {
        assert_eq!(parse_seed("0x5EED"), Ok(0x5EED));
        assert_eq!(parse_seed("42"), Ok(42));
        assert!(parse_seed("0xZZ").is_err());
    }

    #[test]
    fn lambda_pairs() {
        assert_eq!(parse_lambda("-1,0.5"), Ok(C64::new(-1.0, 0.5)));
        assert_eq!(parse_lambda("2"), Ok(C64::new(2.0, 0.0)));
        assert!(parse_lambda("1,2,3").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
