//! CSV emission of per-round device states, plus a gnuplot helper that
//! draws the bandwidth and marginal-utility panels from that CSV.

use std::io::{self, Write};

use crate::engine::TraceRow;
use crate::scalar::Real;

pub const TRACE_HEADER: &str = "iter,device,x,u_prime,zeta,q";

/// Floats are written in shortest round-trip form, so identical runs give
/// byte-identical files.
pub fn write_trace_csv<T: Real, W: Write>(rows: &[TraceRow<T>], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter, r.device, r.x, r.u_prime, r.zeta, r.q
        )?;
    }
    out.flush()
}

pub fn write_gnuplot_script<W: Write>(
    csv_path: &str,
    devices: usize,
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "set datafile separator ','")?;
    writeln!(out, "set key autotitle columnhead")?;
    writeln!(out, "set multiplot layout 1,2")?;
    for (column, label) in [(3, "bandwidth x"), (4, "marginal utility U'")] {
        writeln!(out, "set xlabel 'iteration'; set ylabel \"{label}\"")?;
        let series: Vec<String> = (0..devices)
            .map(|d| {
                format!(
                    "'{csv_path}' using 1:(${{2}}=={d} ? ${column} : 1/0) with lines title 'device {}'",
                    d + 1
                )
            })
            .collect();
        writeln!(out, "plot {}", series.join(", \\\n     "))?;
    }
    writeln!(out, "unset multiplot")?;
    out.flush()
}
