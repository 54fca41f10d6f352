//! Grid labyrinths as combinator repositories.
//!
//! Free cells are `Pos(x,y)` atoms. Each move combinator carries one arrow
//! per pair of adjacent free cells: `left` decreases `x`, `right` increases
//! it, `up` decreases `y` and `down` increases it. `start` has the type of
//! the start cell.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::repository::{Combinator, Repository};
use crate::types::{Taxonomy, Type};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Maze {
    pub width: usize,
    pub height: usize,
    /// `blocked[y][x]`.
    pub blocked: Vec<Vec<bool>>,
    pub start: (usize, usize),
    pub goal: (usize, usize),
}

fn pos(x: usize, y: usize) -> Type {
    Type::constructor("Pos", vec![Type::constant(x.to_string()), Type::constant(y.to_string())])
}

impl Maze {
    /// The 3 × 4 labyrinth with obstacles at (0,0), (2,0) and (1,2).
    pub fn example() -> Maze {
        let mut blocked = vec![vec![false; 3]; 4];
        for (x, y) in [(0, 0), (2, 0), (1, 2)] {
            blocked[y][x] = true;
        }
        Maze {
            width: 3,
            height: 4,
            blocked,
            start: (0, 2),
            goal: (1, 0),
        }
    }

    /// An `n × n` maze from the bottom-left corner to the top-right one,
    /// each other cell blocked with probability `density`.
    pub fn random(n: usize, seed: u64, density: f64) -> Maze {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = (0, n.saturating_sub(1));
        let goal = (n.saturating_sub(1), 0);
        let blocked = (0..n)
            .map(|y| {
                (0..n)
                    .map(|x| (x, y) != start && (x, y) != goal && rng.gen_bool(density))
                    .collect()
            })
            .collect();
        Maze {
            width: n,
            height: n,
            blocked,
            start,
            goal,
        }
    }

    pub fn is_free(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && !self.blocked[y][x]
    }

    pub fn goal_type(&self) -> Type {
        pos(self.goal.0, self.goal.1)
    }

    /// Combinators in the order left, right, up, down, start. A move with
    /// no legal step is left out.
    pub fn repository(&self) -> Repository {
        let moves: [(&str, i64, i64); 4] = [("left", -1, 0), ("right", 1, 0), ("up", 0, -1), ("down", 0, 1)];
        let mut combinators = Vec::new();
        for (name, dx, dy) in moves {
            let mut arrows = Vec::new();
            for y in 0..self.height {
                for x in 0..self.width {
                    let (tx, ty) = (x as i64 + dx, y as i64 + dy);
                    if tx < 0 || ty < 0 {
                        continue;
                    }
                    let (tx, ty) = (tx as usize, ty as usize);
                    if self.is_free(x, y) && self.is_free(tx, ty) {
                        arrows.push(Type::arrow(pos(x, y), pos(tx, ty)));
                    }
                }
            }
            if !arrows.is_empty() {
                combinators.push(Combinator {
                    name: name.into(),
                    ty: Type::intersect_all(arrows),
                });
            }
        }
        combinators.push(Combinator {
            name: "start".into(),
            ty: pos(self.start.0, self.start.1),
        });
        Repository {
            combinators,
            variable_kinds: Default::default(),
            taxonomy: Taxonomy::default(),
        }
    }

    /// Length of a shortest path from start to goal, by breadth-first search.
    pub fn shortest_path(&self) -> Option<usize> {
        let mut dist = vec![vec![usize::MAX; self.width]; self.height];
        let mut queue = std::collections::VecDeque::from([self.start]);
        dist[self.start.1][self.start.0] = 0;
        while let Some((x, y)) = queue.pop_front() {
            if (x, y) == self.goal {
                return Some(dist[y][x]);
            }
            let d = dist[y][x];
            let next = [
                (x.wrapping_sub(1), y),
                (x + 1, y),
                (x, y.wrapping_sub(1)),
                (x, y + 1),
            ];
            for (nx, ny) in next {
                if self.is_free(nx, ny) && dist[ny][nx] == usize::MAX {
                    dist[ny][nx] = d + 1;
                    queue.push_back((nx, ny));
                }
            }
        }
        None
    }
}

impl fmt::Display for Maze {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..self.height {
            for x in 0..self.width {
                let c = if (x, y) == self.start {
                    'S'
                } else if (x, y) == self.goal {
                    'G'
                } else if self.blocked[y][x] {
                    '#'
                } else {
                    '.'
                };
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
