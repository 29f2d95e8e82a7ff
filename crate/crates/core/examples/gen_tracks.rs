//! Writes the built-in courses as track files.
//!
//! cargo run -p neuroevo --example gen_tracks [out_dir]

use std::path::PathBuf;

use neuroevo::track::{closed_circuit, s_curve, straight_corridor};

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "tracks".into()));
    std::fs::create_dir_all(&dir)?;
    for (file, track) in [
        ("straight.json", straight_corridor(200.0)),
        ("s_curve.json", s_curve()),
        ("circuit.json", closed_circuit()),
    ] {
        let path = dir.join(file);
        std::fs::write(&path, track.to_json() + "\n")?;
        println!(
            "{}: {} walls, finish at {} m",
            path.display(),
            track.walls().len(),
            track.finish_s()
        );
    }
    Ok(())
}
