//! Sample schemas and workloads shipped with the crate.

use crate::catalog::Catalog;
use crate::sql::Workload;

pub const TPCH_CATALOG: &str = include_str!("../../../data/tpch/catalog.json");
/// TPC-H queries 1, 3-16, 18, 19, 21 and 22.
pub const TPCH_WORKLOAD: &str = include_str!("../../../data/tpch/workload.sql");
pub const TOY_CATALOG: &str = include_str!("../../../data/toy/catalog.json");
pub const TOY_WORKLOAD: &str = include_str!("../../../data/toy/workload.sql");

pub fn tpch_catalog() -> Catalog {
    Catalog::from_json(TPCH_CATALOG).expect("bundled TPC-H catalog is valid")
}

pub fn tpch_workload() -> Workload {
    Workload::parse("tpch", TPCH_WORKLOAD).expect("bundled TPC-H workload is valid")
}

pub fn toy_catalog() -> Catalog {
    Catalog::from_json(TOY_CATALOG).expect("bundled toy catalog is valid")
}

pub fn toy_workload() -> Workload {
    Workload::parse("toy", TOY_WORKLOAD).expect("bundled toy workload is valid")
}
