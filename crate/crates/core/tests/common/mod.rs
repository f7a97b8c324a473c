#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use kpp_core::front::solve_front;
use kpp_core::model::{ModelParams, Nonlinearity, DEFAULT_ALPHA, DEFAULT_BETA};
use kpp_core::operator::FrontOperator;

/// Default KPP operator, solved once per test binary.
pub fn kpp_operator() -> &'static FrontOperator {
    static OP: OnceLock<FrontOperator> = OnceLock::new();
    OP.get_or_init(|| {
        let nl = Nonlinearity::Kpp;
        let m = ModelParams::for_nonlinearity(&nl, DEFAULT_BETA, DEFAULT_ALPHA).unwrap();
        let p = solve_front(&nl, &m, -60.0, 60.0, 0.02).unwrap();
        FrontOperator::new(Arc::new(p), m, nl)
    })
}
