//! Case-study models and formulas shipped with the tool.

use ahltl_core::{parse_formula, parse_model, AhltlFormula, ModelBundle};

pub const BRANCH_MODEL: &str = include_str!("../cases/branch.model");
pub const NI: &str = include_str!("../cases/ni.hltl");
pub const NI_ND: &str = include_str!("../cases/ni_nd.hltl");

pub const ACDB_H0: &str = include_str!("../cases/acdb_h0.model");
pub const ACDB_H1: &str = include_str!("../cases/acdb_h1.model");
pub const ACDB: &str = include_str!("../cases/acdb.hltl");

pub const DBE_SRC: &str = include_str!("../cases/dbe_src.model");
pub const DBE_TGT_OK: &str = include_str!("../cases/dbe_tgt_ok.model");
pub const DBE_TGT_BAD: &str = include_str!("../cases/dbe_tgt_bad.model");
pub const DBE: &str = include_str!("../cases/dbe.hltl");

fn formula(text: &str) -> AhltlFormula {
    parse_formula(text).expect("shipped formula parses")
}

fn bundle(models: &[(&str, &str)]) -> ModelBundle {
    let mut b = ModelBundle::new();
    for (name, text) in models {
        let m = parse_model(text).expect("shipped model parses");
        b.insert_as(name.to_string(), m).expect("distinct names");
    }
    b
}

pub fn branch() -> ModelBundle {
    ModelBundle::single(parse_model(BRANCH_MODEL).expect("shipped model parses"))
}

pub fn ni() -> AhltlFormula {
    formula(NI)
}

pub fn ni_nd() -> AhltlFormula {
    formula(NI_ND)
}

/// The two threads' interleavings, bound as `h0` and `h1`.
pub fn acdb() -> (ModelBundle, AhltlFormula) {
    (bundle(&[("h0", ACDB_H0), ("h1", ACDB_H1)]), formula(ACDB))
}

/// Source and a target, bound as `src` and `tgt`; `ok` picks the correct
/// target.
pub fn dbe(ok: bool) -> (ModelBundle, AhltlFormula) {
    let tgt = if ok { DBE_TGT_OK } else { DBE_TGT_BAD };
    (bundle(&[("src", DBE_SRC), ("tgt", tgt)]), formula(DBE))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assets_parse() {
        assert_eq!(branch().len(), 1);
        assert_eq!(ni().num_paths(), 2);
        assert_eq!(ni_nd().num_trajs(), 2);
        assert_eq!(acdb().0.len(), 2);
        assert_eq!(dbe(true).1.num_trajs(), 2);
        assert_eq!(dbe(false).0.len(), 2);
    }
}
