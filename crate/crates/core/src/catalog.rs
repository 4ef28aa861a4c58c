//! Named mechanisms used as fixtures by the checkers, the acceptance suite
//! and `moral-mech catalog`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::{PaymentGrid, Price, ProfitMaximizer};
use crate::rational::Rational;
use crate::sampling::unit_grid;

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: &'static [&'static str],
    pub about: &'static str,
}

pub const ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        name: "non-monotone",
        params: &["alpha"],
        about: "alpha-moral two-player mechanism whose allocation is not monotone",
    },
    CatalogEntry {
        name: "scaled-second-price",
        params: &["c", "points", "players"],
        about: "highest value wins and pays c times the second-highest value",
    },
    CatalogEntry {
        name: "free-tie",
        params: &["points"],
        about: "two players, each presents 1 - v (or never above 1); winners on the tied region are free",
    },
    CatalogEntry {
        name: "reserve-second-price",
        params: &["reserve", "points", "players"],
        about: "highest value at or above the reserve wins and pays max(reserve, second value)",
    },
];

/// Parameters accepted by [`build`]; unused ones are ignored.
#[derive(Clone, Debug, Default)]
pub struct Params {
    pub alpha: Option<Rational>,
    pub c: Option<Rational>,
    pub reserve: Option<Rational>,
    pub points: Option<usize>,
    pub players: Option<usize>,
}

pub fn build(name: &str, p: &Params) -> Result<ProfitMaximizer> {
    let points = p.points.unwrap_or(3);
    let players = p.players.unwrap_or(2);
    if points == 0 || players == 0 {
        return Err(Error::InvalidArgument("points and players must be positive".into()));
    }
    let need = |x: &Option<Rational>, what: &str| {
        x.clone()
            .ok_or_else(|| Error::InvalidArgument(format!("{name} needs --{what}")))
    };
    match name {
        "non-monotone" => {
            let alpha = need(&p.alpha, "alpha")?;
            claim31_mechanism(&alpha, claim31_default_values(&alpha)?)
        }
        "scaled-second-price" => scaled_second_price(&need(&p.c, "c")?, vec![unit_grid(points); players]),
        "free-tie" => {
            let mut vs = unit_grid(points);
            vs.push(Rational::new(5, 4));
            nochar_family(&BTreeMap::new(), vec![vs; 2])
        }
        "reserve-second-price" => {
            reserve_second_price(&need(&p.reserve, "reserve")?, vec![unit_grid(points); players])
        }
        _ => Err(Error::InvalidArgument(format!("unknown catalog entry {name}"))),
    }
}

fn check_unit_interval(x: &Rational, what: &str) -> Result<()> {
    if x.is_negative() || *x > Rational::one() {
        return Err(Error::InvalidArgument(format!("{what} = {x} is outside [0, 1]")));
    }
    Ok(())
}

/// Player 1: `{0, 1/2, 1, 1 + alpha/10, 3/2}`; player 2:
/// `{0, 1/20, 1/10, 1/5, 1/2, 1}`.
pub fn claim31_default_values(alpha: &Rational) -> Result<Vec<Vec<Rational>>> {
    let kink = Rational::one() + alpha / &Rational::int(10);
    if !alpha.is_positive() || kink >= Rational::new(3, 2) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    Ok(vec![
        vec![Rational::zero(), Rational::new(1, 2), Rational::one(), kink, Rational::new(3, 2)],
        ["0", "1/20", "1/10", "1/5", "1/2", "1"].iter().map(|s| s.parse().unwrap()).collect(),
    ])
}

/// Two players. Player 1 buys at price 1 when `v1 >= 1`, `v1 != 1 + alpha/10`
/// and `v2 >= 1/10`; at `v1 = 1 + alpha/10` player 2 gets the item for
/// free; otherwise no sale.
pub fn claim31_mechanism(alpha: &Rational, values: Vec<Vec<Rational>>) -> Result<ProfitMaximizer> {
    check_unit_interval(alpha, "alpha")?;
    if !alpha.is_positive() {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    if values.len() != 2 {
        return Err(Error::InvalidArgument("mechanism is for two players".into()));
    }
    let one = Rational::one();
    let kink = &one + alpha / &Rational::int(10);
    let tenth = Rational::new(1, 10);
    for (player, v) in [(0, &one), (0, &kink), (1, &tenth)] {
        if !values[player].contains(v) {
            return Err(Error::GridMissingValues {
                player: player + 1,
                value: v.clone(),
            });
        }
    }
    let grid = PaymentGrid::from_fn(values, |i, opp| {
        let other = &opp[0];
        match i {
            0 if *other >= tenth => Price::Finite(one.clone()),
            1 if *other == kink => Price::Finite(Rational::zero()),
            _ => Price::Never,
        }
    })?;
    let mut m = ProfitMaximizer::new(grid, alpha.clone());
    // with alpha = 1 the kink and v2 = 1/10 tie; the rule hands it to player 2
    for flat in 0..m.grid.instance_count() {
        let p = m.grid.profile_of(flat);
        let v = m.grid.values_of(&p);
        let want = if v[0] == kink {
            Some(1)
        } else if v[0] >= one && v[1] >= tenth {
            Some(0)
        } else {
            None
        };
        if m.allocate_indices(&p).winner != want {
            m.set_override(&p, want)
                .map_err(|e| Error::Defect(format!("non-monotone fixture: {e}")))?;
        }
    }
    Ok(m)
}

/// `p_{-i} = c * max(v_{-i})`.
pub fn scaled_second_price(c: &Rational, values: Vec<Vec<Rational>>) -> Result<ProfitMaximizer> {
    check_unit_interval(c, "c")?;
    let grid = PaymentGrid::from_fn(values, |_, opp| {
        let top = opp.iter().max().cloned().unwrap_or_else(Rational::zero);
        Price::Finite(c * &top)
    })?;
    Ok(ProfitMaximizer::new(grid, Rational::one()))
}

/// Two players; each presents `1 - v` to the other while `v <= 1` and
/// `Never` above. On the region `v1 + v2 >= 1`, `v1, v2 <= 1` both profits
/// are equal, and `selector` (keyed by `(v1, v2)`, value = 0-based winner)
/// picks the winner; unlisted instances use the tie-break.
pub fn nochar_family(
    selector: &BTreeMap<(Rational, Rational), usize>,
    values: Vec<Vec<Rational>>,
) -> Result<ProfitMaximizer> {
    if values.len() != 2 {
        return Err(Error::InvalidArgument("family is for two players".into()));
    }
    let one = Rational::one();
    let grid = PaymentGrid::from_fn(values, |_, opp| {
        if opp[0] <= one {
            Price::Finite(&one - &opp[0])
        } else {
            Price::Never
        }
    })?;
    let mut m = ProfitMaximizer::new(grid, one.clone());
    for ((v1, v2), &w) in selector {
        let free = v1 <= &one && v2 <= &one && v1 + v2 >= one;
        if !free || w > 1 {
            return Err(Error::SelectorOutOfRegion {
                v1: Box::new(v1.clone()),
                v2: Box::new(v2.clone()),
            });
        }
        let p = m.grid.indices_of(&[v1.clone(), v2.clone()])?;
        m.set_override(&p, Some(w))?;
    }
    Ok(m)
}

/// `p_{-i} = max(reserve, max(v_{-i}))`.
pub fn reserve_second_price(reserve: &Rational, values: Vec<Vec<Rational>>) -> Result<ProfitMaximizer> {
    if let Some(i) = values.iter().position(|v| !v.contains(reserve)) {
        return Err(Error::off_grid(reserve, format!("value set of player {}", i + 1)));
    }
    let grid = PaymentGrid::from_fn(values, |_, opp| {
        let top = opp.iter().max().cloned().unwrap_or_else(Rational::zero);
        Price::Finite(top.max(reserve.clone()))
    })?;
    Ok(ProfitMaximizer::new(grid, Rational::one()))
}
