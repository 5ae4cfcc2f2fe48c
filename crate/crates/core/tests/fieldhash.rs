use proptest::prelude::*;
use zklab_core::fieldhash::{audit_family, DEFAULT_ENUM_LIMIT};
use zklab_core::{eval_hash, field_mul, FieldElement, HashFamily, HashFunction};

fn element(m: u8) -> impl Strategy<Value = FieldElement> {
    (0u32..1 << m).prop_map(move |v| FieldElement::new(v, m).unwrap())
}

fn triple() -> impl Strategy<Value = (FieldElement, FieldElement, FieldElement)> {
    (1u8..=16).prop_flat_map(|m| (element(m), element(m), element(m)))
}

proptest! {
    #[test]
    fn multiplication_is_a_commutative_ring((a, b, c) in triple()) {
        prop_assert_eq!(field_mul(a, b).unwrap(), field_mul(b, a).unwrap());
        prop_assert_eq!(
            field_mul(field_mul(a, b).unwrap(), c).unwrap(),
            field_mul(a, field_mul(b, c).unwrap()).unwrap()
        );
        let left = field_mul(a, b.add(c).unwrap()).unwrap();
        let right = field_mul(a, b).unwrap().add(field_mul(a, c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn nonzero_elements_have_inverses(a in (1u8..=8).prop_flat_map(element)) {
        prop_assume!(a.value() != 0);
        let m = a.degree();
        let one = FieldElement::one(m).unwrap();
        let inverse = (1..1u32 << m).map(|v| FieldElement::new(v, m).unwrap()).find(|&b| field_mul(a, b).unwrap() == one);
        prop_assert!(inverse.is_some());
    }

    /// The hash is linear in its coefficient vector.
    #[test]
    fn evaluation_is_linear_in_coefficients(
        (n1, n2) in (1u8..=6, 1u8..=6),
        seed in any::<u64>(),
        alpha in any::<u64>(),
    ) {
        let m = n1.max(n2);
        let coeffs = |s: u64| (0..3u64).map(|i| FieldElement::new(((s >> (i * 16)) as u32) & ((1 << m) - 1), m).unwrap()).collect::<Vec<_>>();
        let (a, b) = (coeffs(seed), coeffs(seed.rotate_left(29)));
        let sum: Vec<_> = a.iter().zip(&b).map(|(x, y)| x.add(*y).unwrap()).collect();
        let x = alpha & ((1 << n1) - 1);
        let ev = |c: Vec<FieldElement>| eval_hash(&HashFunction::new(n1, n2, c).unwrap(), x).unwrap();
        prop_assert_eq!(ev(sum), ev(a) ^ ev(b));
    }
}

#[test]
fn audits_are_exactly_uniform_for_small_families() {
    for (n1, n2, t) in [(1, 1, 1), (1, 2, 2), (2, 1, 3), (2, 2, 3), (3, 1, 2), (3, 2, 3), (2, 3, 4)] {
        let audit = audit_family(&HashFamily::new(n1, n2, t).unwrap(), DEFAULT_ENUM_LIMIT).unwrap();
        assert!(audit.passed(), "({n1},{n2},{t}) deviation {}", audit.max_deviation);
        let total: u64 = audit.point_counts.iter().flatten().sum();
        assert_eq!(total, audit.family_size << n1);
    }
}
