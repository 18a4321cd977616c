//! Optimal Jacobian accumulation toolbox for linearized differentiation graphs.
//!
//! The core is `no_std` with `alloc`; file formats and the command line live in
//! the `ojacc` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod convert;
pub mod error;
pub mod expr;
pub mod factor;
pub mod gen;
pub mod graph;
pub mod line_graph;
pub mod local_jacobian;
pub mod natord;
mod net;
pub mod oracle;
pub mod pages;
pub mod relations;
pub mod structure;

pub use convert::{expr_to_graph, graph_to_expr};
pub use error::{Error, Result};
pub use expr::{expand_refs, fma_cost, format_exprset, parse_expr, parse_exprset, Expr, ExprSet};
pub use graph::{format_graph, parse_graph, DiffGraph, Edge, Path};
pub use line_graph::{build_line_graph, LineGraph};
