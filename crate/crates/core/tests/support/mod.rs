#![allow(dead_code)]
pub mod cart;
