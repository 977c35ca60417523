//! Parsing of grid axes given on the command line: comma-separated items,
//! each either a single value or an inclusive range such as `f1..f10` or
//! `N0..N4`.

use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use inexact_lmbm::{NoiseKind, ProblemId};

/// `f1..f10`, `f1,f3`, `f2..f4,f9`.
pub fn parse_problems(s: &str) -> anyhow::Result<Vec<ProblemId>> {
    parse_indexed(s, 'f', 1, 10)?
        .into_iter()
        .map(|i| ProblemId::from_index(i).ok_or_else(|| anyhow!("no problem f{i}")))
        .collect()
}

/// `N0..N4`, `N1,N3`.
pub fn parse_noise(s: &str) -> anyhow::Result<Vec<NoiseKind>> {
    parse_indexed(s, 'n', 0, 4)?
        .into_iter()
        .map(|i| Ok(NoiseKind::ALL[i]))
        .collect()
}

/// Comma-separated values of any parseable type.
pub fn parse_list<T: FromStr>(s: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',')
        .map(str::trim)
        .filter(|item| !item.is_empty())
        .map(|item| item.parse::<T>().with_context(|| format!("invalid value `{item}`")))
        .collect()
}

fn parse_indexed(s: &str, prefix: char, lo: usize, hi: usize) -> anyhow::Result<Vec<usize>> {
    let index = |item: &str| -> anyhow::Result<usize> {
        let item = item.trim();
        let digits = item
            .strip_prefix(prefix)
            .or_else(|| item.strip_prefix(prefix.to_ascii_uppercase()))
            .ok_or_else(|| anyhow!("`{item}` does not start with `{prefix}`"))?;
        let i: usize = digits.parse().with_context(|| format!("invalid index in `{item}`"))?;
        if !(lo..=hi).contains(&i) {
            bail!("`{item}` is outside {prefix}{lo}..{prefix}{hi}");
        }
        Ok(i)
    };
    let mut out = Vec::new();
    for item in s.split(',').filter(|item| !item.trim().is_empty()) {
        match item.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (index(a)?, index(b)?);
                if a > b {
                    bail!("empty range `{}`", item.trim());
                }
                out.extend(a..=b);
            }
            None => out.push(index(item)?),
        }
    }
    Ok(out)
}
