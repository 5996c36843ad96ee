use super::StructureConstants;

/// Doubles an algebra: pairs `(a, b)` multiply as
/// `(a, b)(c, d) = (ac - d*b, da + bc*)`, where `*` negates every non-unit
/// coordinate.
///
/// The new basis is `e_i -> (e_i, 0)` followed by `e_{n+i} -> (0, e_i)`.
/// Only meaningful along the Reals, Complex, Quaternions chain, where that
/// conjugation is the algebra's involution; it serves as an independent
/// construction of the Complex, Quaternion and Octonion tables.
pub fn cayley_dickson(base: &StructureConstants) -> StructureConstants {
    let n = base.dim();
    let big = 2 * n;
    let mut tensor = vec![0.0; big * big * big];

    let basis = |index: usize| {
        let mut v = vec![0.0; n];
        v[index] = 1.0;
        v
    };
    let conj = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| if i == 0 { x } else { -x })
            .collect()
    };
    let split = |index: usize| {
        if index < n {
            (basis(index), vec![0.0; n])
        } else {
            (vec![0.0; n], basis(index - n))
        }
    };
    let mul = |x: &[f64], y: &[f64]| {
        base.mult_slices(x, y)
            .expect("operands are built with the base dimension")
    };

    for p in 0..big {
        let (a, b) = split(p);
        for q in 0..big {
            let (c, d) = split(q);
            let ac = mul(&a, &c);
            let db = mul(&conj(&d), &b);
            let da = mul(&d, &a);
            let bc = mul(&b, &conj(&c));
            let row = &mut tensor[(p * big + q) * big..(p * big + q + 1) * big];
            for k in 0..n {
                row[k] = ac[k] - db[k];
                row[n + k] = da[k] + bc[k];
            }
        }
    }

    let name = base.name().map(|s| format!("CayleyDickson({s})"));
    StructureConstants::from_tensor(big, tensor, name).expect("doubled tensor has consistent shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::predefined;

    #[test]
    fn doubling_reals_gives_complex() {
        let c = cayley_dickson(&predefined("Reals").unwrap());
        assert_eq!(c.dim(), 2);
        assert_eq!(c.get(1, 1, 0), -1.0);
        assert!(c.check_unit());
    }

    #[test]
    fn doubling_complex_gives_ij_equals_k() {
        let q = cayley_dickson(&predefined("Complex").unwrap());
        assert_eq!(q.basis_product(1, 2), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(q.basis_product(2, 1), &[0.0, 0.0, 0.0, -1.0]);
    }
}
