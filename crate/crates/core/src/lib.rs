//! Bubble diagnostics for monthly price series.
//!
//! Two independent lenses are provided: long-run deviation from
//! fundamentals ([`regression`]) and super-exponential LPPLS growth
//! ([`lppls`], [`calibrate`], [`filter`]). [`sim`] generates synthetic
//! JLS price paths with known parameters.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod filter;
pub mod lppls;
pub mod reference;
pub mod regression;
pub mod series;
pub mod sim;

pub use series::{month_diff, parse_month, MonthStamp, PriceSeries, Window};
