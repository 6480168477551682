use std::collections::VecDeque;

/// North, south, east, west as `(drow, dcol)`.
pub(crate) const MOVES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, 1), (0, -1)];
pub(crate) const MOVE_NAMES: [&str; 4] = ["north", "south", "east", "west"];

pub(crate) fn offset(
    rows: usize,
    cols: usize,
    (r, c): (usize, usize),
    (dr, dc): (isize, isize),
) -> Option<(usize, usize)> {
    let nr = r.checked_add_signed(dr)?;
    let nc = c.checked_add_signed(dc)?;
    (nr < rows && nc < cols).then_some((nr, nc))
}

/// Breadth-first distances from `sources` over an undirected neighbour
/// relation on cells `0..n`.
pub(crate) fn bfs<F>(n: usize, sources: &[usize], mut neighbours: F) -> Vec<Option<u32>>
where
    F: FnMut(usize) -> Vec<usize>,
{
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    for &s in sources {
        if dist[s].is_none() {
            dist[s] = Some(0);
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        let d = dist[u].expect("queued cells have a distance");
        for v in neighbours(u) {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Moves from `cell` that strictly decrease `dist` by one.
pub(crate) fn descending(dist: &[Option<u32>], cell: usize, next: &[Option<usize>]) -> Vec<usize> {
    let Some(d) = dist[cell] else {
        return Vec::new();
    };
    next.iter()
        .enumerate()
        .filter(|(_, n)| matches!(n, Some(n) if dist[*n].is_some_and(|dn| dn + 1 == d)))
        .map(|(i, _)| i)
        .collect()
}

/// Whitespace-separated line reader for the small data formats; `%` starts
/// a comment.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('%').next().unwrap_or("").trim();
        (!line.is_empty()).then(|| (i + 1, line.split_whitespace().collect()))
    })
}
