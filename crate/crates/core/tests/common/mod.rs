#![allow(dead_code)]

pub mod topologies;
