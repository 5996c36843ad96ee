use super::StructureConstants;
use crate::error::{Error, Result};

/// Canonical names of the bundled algebras, in registry order.
pub const PREDEFINED_NAMES: [&str; 10] = [
    "Reals",
    "Complex",
    "Quaternions",
    "Klein4",
    "Cl20",
    "Coquaternions",
    "Cl11",
    "Bicomplex",
    "Tessarines",
    "Octonions",
];

// Tables ship as algebra files; the Octonion table is the Cayley-Dickson
// double of the Quaternions, the 4-dimensional ones follow the usual
// generator conventions (see each file).
const TABLES: [(&str, &str); 10] = [
    ("Reals", include_str!("../../algebras/reals.json")),
    ("Complex", include_str!("../../algebras/complex.json")),
    (
        "Quaternions",
        include_str!("../../algebras/quaternions.json"),
    ),
    ("Klein4", include_str!("../../algebras/klein4.json")),
    ("Cl20", include_str!("../../algebras/cl20.json")),
    (
        "Coquaternions",
        include_str!("../../algebras/coquaternions.json"),
    ),
    ("Cl11", include_str!("../../algebras/cl11.json")),
    ("Bicomplex", include_str!("../../algebras/bicomplex.json")),
    ("Tessarines", include_str!("../../algebras/tessarines.json")),
    ("Octonions", include_str!("../../algebras/octonions.json")),
];

/// Looks up a bundled algebra by name, ignoring ASCII case.
pub fn predefined(name: &str) -> Result<StructureConstants> {
    let (canonical, source) = TABLES
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownAlgebra {
            name: name.to_string(),
            valid: PREDEFINED_NAMES.to_vec(),
        })?;
    let alg = StructureConstants::from_json(source)
        .unwrap_or_else(|e| panic!("bundled table {canonical} is invalid: {e}"));
    Ok(alg.with_name(*canonical))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_tables_load_with_unit_law() {
        for name in PREDEFINED_NAMES {
            let alg = predefined(name).unwrap();
            assert!(alg.check_unit(), "{name}");
            assert_eq!(alg.name(), Some(name));
        }
    }

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!(predefined("complex").unwrap().dim(), 2);
        assert_eq!(predefined("OCTONIONS").unwrap().dim(), 8);
        assert_eq!(predefined("Reals").unwrap().dim(), 1);
    }

    #[test]
    fn unknown_name_lists_choices() {
        let err = predefined("Sedenions").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("Sedenions") && msg.contains("Tessarines"),
            "{msg}"
        );
    }

    #[test]
    fn documented_generator_conventions() {
        let sq = |name: &str, i: usize| predefined(name).unwrap().basis_product(i, i)[0];
        let prod =
            |name: &str, i: usize, j: usize| predefined(name).unwrap().basis_product(i, j).to_vec();
        let e3 = vec![0.0, 0.0, 0.0, 1.0];
        for i in 1..4 {
            assert_eq!(sq("Klein4", i), 1.0);
        }
        assert_eq!(prod("Klein4", 1, 2), e3);
        assert_eq!(
            (sq("Cl20", 1), sq("Cl20", 2), sq("Cl20", 3)),
            (1.0, 1.0, -1.0)
        );
        assert_eq!(prod("Cl20", 1, 2), e3);
        assert_eq!(
            (
                sq("Coquaternions", 1),
                sq("Coquaternions", 2),
                sq("Coquaternions", 3)
            ),
            (-1.0, 1.0, 1.0)
        );
        assert_eq!(prod("Coquaternions", 1, 2), e3);
        assert_eq!((sq("Cl11", 1), sq("Cl11", 2)), (1.0, -1.0));
        assert_eq!(prod("Cl11", 1, 2), e3);
        assert_eq!((sq("Tessarines", 1), sq("Tessarines", 2)), (-1.0, 1.0));
        assert_eq!(prod("Tessarines", 1, 2), e3);
        assert_eq!(
            (sq("Bicomplex", 1), sq("Bicomplex", 2), sq("Bicomplex", 3)),
            (-1.0, -1.0, 1.0)
        );
        assert_eq!(prod("Bicomplex", 1, 2), e3);
        for name in ["Klein4", "Tessarines", "Bicomplex"] {
            assert!(predefined(name).unwrap().check_commutative(), "{name}");
        }
        for name in ["Cl20", "Coquaternions", "Cl11"] {
            assert!(!predefined(name).unwrap().check_commutative(), "{name}");
        }
    }
}
