//! JSON formats for set systems, chains, colorings, gap instances and ABPs.
//! Elements are written 1-based.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gapfill::GapInstance;
use crate::ground::{BalancedColoring, GroundSize, MaximalChain, SetSystem, SubsetMask};
use crate::mabp::{Abp, Gadget, PrimeField};

/// Largest ground size accepted from JSON.
pub const MAX_JSON_N: usize = 1 << 16;

fn ground(n: usize) -> Result<GroundSize> {
    if n > MAX_JSON_N {
        return Err(Error::capacity("JSON ground size", n, MAX_JSON_N));
    }
    GroundSize::new(n)
}

fn parse_set(n: usize, elems: &[usize]) -> Result<SubsetMask> {
    let mut s = SubsetMask::empty(n);
    for &e in elems {
        if e == 0 || e > n {
            return Err(Error::Input(format!("element {e} outside 1..={n}")));
        }
        if s.contains(e - 1) {
            return Err(Error::Input(format!("element {e} repeated")));
        }
        s.insert(e - 1);
    }
    Ok(s)
}

fn write_set(s: &SubsetMask) -> Vec<usize> {
    s.iter().map(|e| e + 1).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetSystemJson {
    n: usize,
    sets: Vec<Vec<usize>>,
}

pub fn set_system_from_json(s: &str) -> Result<SetSystem> {
    let j: SetSystemJson = serde_json::from_str(s)?;
    let n = ground(j.n)?;
    let sets = j.sets.iter().map(|e| parse_set(j.n, e)).collect::<Result<_>>()?;
    SetSystem::new(n, sets)
}

pub fn set_system_to_json(x: &SetSystem) -> String {
    let j = SetSystemJson {
        n: x.n(),
        sets: x.sets().iter().map(write_set).collect(),
    };
    serde_json::to_string(&j).expect("plain data serializes")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainJson {
    n: usize,
    order: Vec<usize>,
}

pub fn chain_from_json(s: &str) -> Result<MaximalChain> {
    let j: ChainJson = serde_json::from_str(s)?;
    ground(j.n)?;
    if j.order.len() != j.n {
        return Err(Error::Dimension {
            expected: j.n,
            actual: j.order.len(),
        });
    }
    let order = j
        .order
        .iter()
        .map(|&e| e.checked_sub(1).ok_or_else(|| Error::Input("element 0 in a 1-based chain".into())))
        .collect::<Result<Vec<_>>>()?;
    MaximalChain::new(order)
}

pub fn chain_to_json(c: &MaximalChain) -> String {
    let j = ChainJson {
        n: c.n(),
        order: c.order().iter().map(|e| e + 1).collect(),
    };
    serde_json::to_string(&j).expect("plain data serializes")
}

pub fn coloring_from_json(s: &str) -> Result<BalancedColoring> {
    let v: Vec<i8> = serde_json::from_str(s)?;
    ground(v.len())?;
    BalancedColoring::new(v)
}

pub fn coloring_to_json(f: &BalancedColoring) -> String {
    serde_json::to_string(f.values()).expect("plain data serializes")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GapInstanceJson {
    coloring: Vec<i8>,
    base: Vec<usize>,
    gap: Vec<usize>,
}

/// Parses and validates a gap instance (disjoint, both ends within 1).
pub fn gap_instance_from_json(s: &str) -> Result<GapInstance> {
    let j: GapInstanceJson = serde_json::from_str(s)?;
    let n = ground(j.coloring.len())?.get();
    let f = BalancedColoring::new(j.coloring)?;
    GapInstance::new(f, parse_set(n, &j.base)?, parse_set(n, &j.gap)?)
}

pub fn gap_instance_to_json(g: &GapInstance) -> String {
    let j = GapInstanceJson {
        coloring: g.f.values().to_vec(),
        base: write_set(&g.s),
        gap: write_set(&g.i),
    };
    serde_json::to_string(&j).expect("plain data serializes")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeJson {
    from: Vec<usize>,
    to: Vec<usize>,
    u: usize,
    v: usize,
    w1: String,
    w2: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AbpJson {
    n: usize,
    modulus: String,
    gadget: Gadget,
    layers: Vec<Vec<Vec<usize>>>,
    edges: Vec<EdgeJson>,
}

fn parse_u64(s: &str) -> Result<u64> {
    s.parse().map_err(|_| Error::Parse(format!("{s:?} is not a decimal u64")))
}

pub fn abp_to_json(abp: &Abp) -> String {
    let layers = abp
        .layers()
        .iter()
        .map(|l| l.iter().map(|&i| write_set(&abp.vertices()[i])).collect())
        .collect();
    let edges = abp
        .edges()
        .iter()
        .map(|e| EdgeJson {
            from: write_set(&abp.vertices()[e.from]),
            to: write_set(&abp.vertices()[e.to]),
            u: e.u + 1,
            v: e.v + 1,
            w1: e.w1.to_string(),
            w2: e.w2.to_string(),
        })
        .collect();
    let j = AbpJson {
        n: abp.n(),
        modulus: abp.field().modulus().to_string(),
        gadget: abp.gadget(),
        layers,
        edges,
    };
    serde_json::to_string(&j).expect("plain data serializes")
}

pub fn abp_from_json(s: &str) -> Result<Abp> {
    let j: AbpJson = serde_json::from_str(s)?;
    let n = ground(j.n)?.get();
    let field = PrimeField::new(parse_u64(&j.modulus)?)?;
    let mut vertices = Vec::new();
    let mut seen = HashSet::new();
    for (k, layer) in j.layers.iter().enumerate() {
        for e in layer {
            let set = parse_set(n, e)?;
            if set.len() != 2 * k {
                return Err(Error::Structure(format!("set of size {} listed in layer {k}", set.len())));
            }
            if !seen.insert(set.clone()) {
                return Err(Error::Structure("vertex listed twice".into()));
            }
            vertices.push(set);
        }
    }
    let mut edges = Vec::with_capacity(j.edges.len());
    for e in &j.edges {
        if e.u == 0 || e.v == 0 {
            return Err(Error::Input("element 0 in a 1-based edge".into()));
        }
        edges.push((parse_set(n, &e.from)?, parse_set(n, &e.to)?, e.u - 1, e.v - 1, parse_u64(&e.w1)?, parse_u64(&e.w2)?));
    }
    Abp::from_parts(n, field, j.gadget, vertices, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mabp::{build_abp, WeightAssignment};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn set_system_roundtrip() {
        let x = set_system_from_json(r#"{"n": 4, "sets": [[], [2], [2, 4], [1, 2, 4], [1, 2, 3, 4]]}"#).unwrap();
        assert_eq!(x.len(), 5);
        assert!(x.contains(&SubsetMask::from_elements(4, [1, 3]).unwrap()));
        assert_eq!(set_system_from_json(&set_system_to_json(&x)).unwrap(), x);
    }

    #[test]
    fn set_system_rejects_bad_input() {
        for bad in [
            r#"{"n": 4, "sets": [[0]]}"#,
            r#"{"n": 4, "sets": [[5]]}"#,
            r#"{"n": 4, "sets": [[1, 1]]}"#,
            r#"{"n": 3, "sets": []}"#,
            r#"{"n": 4, "sets": [], "extra": 1}"#,
            r#"{"n": 4"#,
        ] {
            assert!(set_system_from_json(bad).is_err(), "{bad}");
        }
        assert!(set_system_from_json(r#"{"n": 1000000000, "sets": []}"#).unwrap_err().is_capacity());
    }

    #[test]
    fn chain_and_coloring_roundtrip() {
        let c = chain_from_json(r#"{"n": 4, "order": [2, 1, 4, 3]}"#).unwrap();
        assert_eq!(c.order(), &[1, 0, 3, 2]);
        assert_eq!(chain_from_json(&chain_to_json(&c)).unwrap(), c);
        assert!(chain_from_json(r#"{"n": 4, "order": [1, 1, 2, 3]}"#).is_err());
        assert!(chain_from_json(r#"{"n": 4, "order": [0, 1, 2, 3]}"#).is_err());
        let f = coloring_from_json("[1, -1, -1, 1]").unwrap();
        assert_eq!(coloring_to_json(&f), "[1,-1,-1,1]");
        assert!(coloring_from_json("[1, 1]").is_err());
    }

    #[test]
    fn gap_instance_roundtrip() {
        let g = gap_instance_from_json(r#"{"coloring": [1, -1, 1, -1], "base": [1], "gap": [2, 3]}"#).unwrap();
        assert_eq!(g.i.elements(), vec![1, 2]);
        assert_eq!(gap_instance_from_json(&gap_instance_to_json(&g)).unwrap(), g);
        assert!(gap_instance_from_json(r#"{"coloring": [1, 1, -1, -1], "base": [1, 2], "gap": []}"#).is_err());
    }

    #[test]
    fn abp_roundtrip() {
        let x = SetSystem::power_set(GroundSize::new(4).unwrap()).unwrap();
        let w = WeightAssignment::random(PrimeField::default(), 4, &mut ChaCha8Rng::seed_from_u64(3));
        let a = build_abp(&x, &w).unwrap();
        let s = abp_to_json(&a);
        assert!(s.contains("\"w1\":\""));
        assert_eq!(abp_from_json(&s).unwrap(), a);
        let broken = s.replacen("\"u\":1", "\"u\":2", 1);
        assert!(abp_from_json(&broken).is_err());
    }
}
