//! Golden files: frozen homotopy-table blocks and serialized elements.
//! The exact values below were produced by the deterministic pivot rule
//! and verified against the block identities; any drift in pivoting or
//! serialization shows up here.

use hoca_core::hkr::HomotopyTable;
use hoca_core::json::{polydiff_to_value, polyvector_to_value, to_canonical_string};
use hoca_core::polydiff::PolyDiffOp;
use hoca_core::polyvector::{Monomial, PolyVector};
use hoca_core::scalar::Rat;

#[test]
fn homotopy_blocks_match_frozen_values() {
    let table = HomotopyTable::new(2, 3, 3);
    let blocks: Vec<(usize, Vec<u32>)> = vec![
        (1, vec![0, 0]),
        (2, vec![0, 0]),
        (2, vec![1, 0]),
        (2, vec![1, 1]),
        (3, vec![1, 1]),
    ];
    for (n, u) in &blocks {
        table.build_block(*n, &Monomial(u.clone())).unwrap();
    }
    let exported = table.export_blocks();
    let get = |n: usize, u: &[u32]| -> Vec<Vec<String>> {
        exported
            .iter()
            .find(|((bn, bu), _)| *bn == n && bu == u)
            .map(|(_, m)| m.clone())
            .expect("block present")
    };
    // the unit word is annihilated
    assert_eq!(get(1, &[0, 0]), vec![vec!["0/1".to_string()]]);
    // H recovers the unit word from the square-zero element, negated
    assert_eq!(get(2, &[0, 0]), vec![vec!["-1/1".to_string()]]);
    // order-(1,0) double words lie outside the contracted directions
    assert_eq!(
        get(2, &[1, 0]),
        vec![vec!["0/1".to_string(), "0/1".to_string()]]
    );
    // the multidegree (1,1) block: both mixed words contract halfway onto
    // the second-order single slot
    assert_eq!(
        get(2, &[1, 1]),
        vec![vec![
            "0/1".to_string(),
            "1/2".to_string(),
            "1/2".to_string(),
            "0/1".to_string()
        ]]
    );
    // frozen corner entries of the word-length-three block
    let b3 = get(3, &[1, 1]);
    assert_eq!(b3.len(), 4);
    assert_eq!(b3[0][2], "1/1");
    assert_eq!(b3[3][8], "-1/1");
    assert!(b3[1].iter().all(|x| x == "0/1"));
    assert!(b3[2].iter().all(|x| x == "0/1"));
}

#[test]
fn serialized_elements_are_byte_stable() {
    let a: PolyVector<Rat> = PolyVector::from_terms(
        2,
        vec![
            (Monomial(vec![1, 0]), vec![0, 1], Rat::new(3.into(), 2.into())),
            (Monomial(vec![0, 0]), vec![], Rat::from_integer((-1).into())),
        ],
    );
    let got = to_canonical_string(&polyvector_to_value(&a));
    let expect = r#"{
  "d": 2,
  "schema": "hoca/1",
  "terms": [
    {
      "coef": "-1/1",
      "mono": [
        0,
        0
      ],
      "wedge": []
    },
    {
      "coef": "3/2",
      "mono": [
        1,
        0
      ],
      "wedge": [
        1,
        2
      ]
    }
  ],
  "type": "polyvector"
}"#;
    assert_eq!(got, expect);

    let mu = PolyDiffOp::mu(2);
    let got = to_canonical_string(&polydiff_to_value(&mu));
    let expect = r#"{
  "d": 2,
  "schema": "hoca/1",
  "terms": [
    {
      "coef": "1/1",
      "mono": [
        0,
        0
      ],
      "word": [
        [
          0,
          0
        ],
        [
          0,
          0
        ]
      ]
    }
  ],
  "type": "polydiff"
}"#;
    assert_eq!(got, expect);
}
