//! Plain-text image output shared by trail heatmaps and membership matrices.

use std::io::Write;

/// Writes an ASCII PGM (`P2`, maxval 255). `values` are row-major, first row
/// at the top. Intensities are rescaled linearly from `[0, max]` to
/// `[0, 255]`; `max` defaults to the largest value present.
pub fn write_pgm<W: Write>(
    mut w: W,
    width: usize,
    height: usize,
    values: &[f64],
    max: Option<f64>,
) -> std::io::Result<()> {
    assert_eq!(values.len(), width * height, "pgm dimensions");
    let peak = max.unwrap_or_else(|| values.iter().cloned().fold(0.0, f64::max));
    writeln!(w, "P2\n{width} {height}\n255")?;
    for row in values.chunks(width.max(1)) {
        let line: Vec<String> = row
            .iter()
            .map(|&v| {
                let g = if peak > 0.0 {
                    (v / peak * 255.0).round()
                } else {
                    0.0
                };
                (g.clamp(0.0, 255.0) as u8).to_string()
            })
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
