//! Mesh text format round trip.

use fraclab::manifold::{read_mesh, write_mesh};
use fraclab::DiscreteManifold;

fn main() -> fraclab::Result<()> {
    let m = DiscreteManifold::flat_torus(3, 3, 1.0, 0.5)?;
    let mut buf = Vec::new();
    write_mesh(&m, &mut buf)?;
    let text = String::from_utf8(buf).expect("mesh text is UTF-8");
    print!("{text}");
    let back = read_mesh(text.as_bytes(), "roundtrip")?;
    println!("read back {} vertices, {} edges", back.n(), back.edges().len());
    Ok(())
}
