//! A workbench for separating classes of finite structures with games.
//!
//! The library is organized around an ordinal-valued notion of formula size:
//! `ordinal` implements Cantor-normal-form arithmetic with the natural
//! (Hessenberg) sum, `formula` builds negation-normal-form ASTs whose size is
//! measured by a pluggable `measure`, `structures` holds finite relational
//! structures and tagged classes, `games` referees and solves the splitting /
//! supplementing games on class pairs, `search` is an independent brute-force
//! formula-enumeration oracle, and `strings` applies the propositional game to
//! dense properties of infinite binary strings.

pub mod formula;
pub mod games;
pub mod io;
pub mod measure;
pub mod ordinal;
pub mod search;
pub mod strings;
pub mod structures;
