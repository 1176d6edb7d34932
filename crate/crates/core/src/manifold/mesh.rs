use super::{DiscreteManifold, EdgeSpec};
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

/// Plain-text mesh: `dm n n_edges n_boundary`, then `v mass [x y z]`,
/// `e i j weight [length]` and `b i` lines.
pub fn write_mesh<W: Write>(m: &DiscreteManifold, mut w: W) -> std::io::Result<()> {
    let edges = m.edges();
    writeln!(w, "dm {} {} {}", m.n(), edges.len(), m.boundary().len())?;
    for i in 0..m.n() {
        match m.coords() {
            Some(c) => writeln!(w, "v {} {} {} {}", m.mass()[i], c[i][0], c[i][1], c[i][2])?,
            None => writeln!(w, "v {}", m.mass()[i])?,
        }
    }
    for (i, j, e) in edges {
        if e.length == 1.0 {
            writeln!(w, "e {i} {j} {}", e.weight)?;
        } else {
            writeln!(w, "e {i} {j} {} {}", e.weight, e.length)?;
        }
    }
    for b in m.boundary() {
        writeln!(w, "b {b}")?;
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::Parse { line, msg: format!("missing {what}") })?
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("bad {what}") })
}

pub fn read_mesh<R: BufRead>(r: R, label: &str) -> Result<DiscreteManifold> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut mass = Vec::new();
    let mut coords: Vec<[f64; 3]> = Vec::new();
    let mut edges: Vec<EdgeSpec> = Vec::new();
    let mut boundary = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let no = k + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let tag = toks.next().unwrap();
        if header.is_none() && tag != "dm" {
            return Err(Error::Parse { line: no, msg: "expected dm header".into() });
        }
        match tag {
            "dm" => {
                if header.is_some() {
                    return Err(Error::Parse { line: no, msg: "second header".into() });
                }
                header = Some((parse(toks.next(), no, "n")?, parse(toks.next(), no, "edge count")?, parse(toks.next(), no, "boundary count")?));
            }
            "v" => {
                mass.push(parse(toks.next(), no, "mass")?);
                let rest: Vec<&str> = toks.by_ref().collect();
                match rest.len() {
                    0 => {}
                    3 => coords.push([parse(Some(rest[0]), no, "x")?, parse(Some(rest[1]), no, "y")?, parse(Some(rest[2]), no, "z")?]),
                    _ => return Err(Error::Parse { line: no, msg: "vertex needs 0 or 3 coordinates".into() }),
                }
            }
            "e" => {
                let i = parse(toks.next(), no, "i")?;
                let j = parse(toks.next(), no, "j")?;
                let w = parse(toks.next(), no, "weight")?;
                let len = match toks.next() {
                    Some(t) => parse(Some(t), no, "length")?,
                    None => 1.0,
                };
                edges.push((i, j, w, len));
            }
            "b" => boundary.push(parse(toks.next(), no, "boundary vertex")?),
            other => return Err(Error::Parse { line: no, msg: format!("unknown record {other:?}") }),
        }
        if toks.next().is_some() {
            return Err(Error::Parse { line: no, msg: "trailing tokens".into() });
        }
    }
    let (n, ne, nb) = header.ok_or(Error::Parse { line: 0, msg: "empty mesh".into() })?;
    if mass.len() != n || edges.len() != ne || boundary.len() != nb {
        return Err(Error::Parse { line: 0, msg: "record counts disagree with header".into() });
    }
    let coords = match coords.len() {
        0 => None,
        c if c == n => Some(coords),
        _ => return Err(Error::Parse { line: 0, msg: "coordinates given for only some vertices".into() }),
    };
    DiscreteManifold::from_parts(mass, &edges, boundary, coords, label)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(m: &DiscreteManifold) -> DiscreteManifold {
        let mut buf = Vec::new();
        write_mesh(m, &mut buf).unwrap();
        read_mesh(buf.as_slice(), m.label()).unwrap()
    }

    #[test]
    fn roundtrip_preserves_weights_masses_and_boundary() {
        for m in [
            DiscreteManifold::flat_torus(4, 5, 0.3, 1.7).unwrap(),
            DiscreteManifold::path_dirichlet(4).unwrap(),
        ] {
            let r = roundtrip(&m);
            assert_eq!(r.mass(), m.mass());
            assert_eq!(r.boundary(), m.boundary());
            assert_eq!(r.edges(), m.edges());
        }
    }

    #[test]
    fn header_counts_are_enforced() {
        let text = "dm 2 1 0\nv 1\nv 1\n";
        assert!(matches!(read_mesh(text.as_bytes(), "x"), Err(Error::Parse { .. })));
        let text = "dm 2 1 0\nv 1\nv 1\ne 0 1 2.5\n";
        let m = read_mesh(text.as_bytes(), "x").unwrap();
        assert_eq!(m.weight(0, 1), 2.5);
        assert!(read_mesh("v 1\n".as_bytes(), "x").is_err());
        assert!(read_mesh("dm 2 1 0\nv 1\nv 1\nq 0 1\n".as_bytes(), "x").is_err());
    }
}
