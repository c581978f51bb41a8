//! Desk-scale simulator and benchmark for hierarchical semantic object search.
//!
//! A robot explores a multi-room scene, infers room types, then descends
//! room → carrier → feature → camera pose guided by a semantic ranker until the target
//! item is seen. Pose plans cover each carrier feature with greedy view selection and
//! are executed in polar (chassis) and lexicographic (camera) order.

pub mod bench;
pub mod config;
pub mod error;
pub mod geometry;
pub mod planner;
pub mod scene;
pub mod search;
pub mod semantics;
