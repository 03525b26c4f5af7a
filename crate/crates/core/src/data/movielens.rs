use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use super::{io_err, DataError, Dataset, Fact};
use crate::rng::substream;

/// The three raw files of the MovieLens-1M distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovieLensFiles {
    pub ratings: PathBuf,
    pub users: PathBuf,
    pub movies: PathBuf,
}

impl MovieLensFiles {
    /// `ratings.dat`, `users.dat` and `movies.dat` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            ratings: dir.join("ratings.dat"),
            users: dir.join("users.dat"),
            movies: dir.join("movies.dat"),
        }
    }

    pub fn exist(&self) -> bool {
        self.ratings.is_file() && self.users.is_file() && self.movies.is_file()
    }
}

/// MovieLens age codes in order; each code is the lower end of its bracket.
pub const AGE_CODES: [u32; 7] = [1, 18, 25, 35, 45, 50, 56];

/// Midpoint of the age bracket starting at `code`. The open brackets "Under
/// 18" and "56+" map to 16 and 60.
pub fn age_midpoint(code: u32) -> Option<f64> {
    match code {
        1 => Some(16.0),
        18 => Some(21.0),
        25 => Some(29.5),
        35 => Some(39.5),
        45 => Some(47.0),
        50 => Some(52.5),
        56 => Some(60.0),
        _ => None,
    }
}

pub const OCCUPATIONS: u32 = 21;

struct Rows {
    file: String,
    text: String,
}

impl Rows {
    fn read(path: &Path) -> Result<Self, DataError> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        Ok(Self {
            file: path.display().to_string(),
            text: String::from_utf8_lossy(&bytes).into_owned(),
        })
    }

    fn iter(
        &self,
        fields: usize,
    ) -> impl Iterator<Item = Result<(usize, Vec<&str>), DataError>> + '_ {
        self.text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(move |(i, l)| {
                let parts: Vec<&str> = l.trim_end_matches('\r').splitn(fields, "::").collect();
                if parts.len() == fields {
                    Ok((i + 1, parts))
                } else {
                    Err(self.err(i + 1, format!("expected {fields} '::'-separated fields")))
                }
            })
    }

    fn err(&self, line: usize, message: String) -> DataError {
        DataError::Parse {
            file: self.file.clone(),
            line,
            message,
        }
    }

    fn int<T: std::str::FromStr>(&self, line: usize, s: &str, what: &str) -> Result<T, DataError> {
        s.trim()
            .parse()
            .map_err(|_| self.err(line, format!("invalid {what} '{s}'")))
    }
}

/// Converts the raw files to a manifest. Ratings become `Likes(user, movie)`
/// with the timestamp as order key, whatever the rating value. Movies get
/// `Action` and `Drama`; users get one-hot `Occ<k>` and `Age<code>` features
/// and `Male`. Labels are `Gender` (male = 1) and `AgeMid`.
pub fn convert_movielens(files: &MovieLensFiles) -> Result<Dataset, DataError> {
    let users = Rows::read(&files.users)?;
    let movies = Rows::read(&files.movies)?;
    let ratings = Rows::read(&files.ratings)?;

    struct User {
        male: bool,
        age: u32,
        occupation: u32,
    }
    let mut user_rows: BTreeMap<u64, User> = BTreeMap::new();
    for row in users.iter(5) {
        let (line, f) = row?;
        let id: u64 = users.int(line, f[0], "user id")?;
        let male = match f[1] {
            "M" => true,
            "F" => false,
            g => return Err(users.err(line, format!("invalid gender '{g}'"))),
        };
        let age: u32 = users.int(line, f[2], "age code")?;
        if age_midpoint(age).is_none() {
            return Err(users.err(line, format!("invalid age code {age}")));
        }
        let occupation: u32 = users.int(line, f[3], "occupation")?;
        if occupation >= OCCUPATIONS {
            return Err(users.err(line, format!("invalid occupation {occupation}")));
        }
        if user_rows
            .insert(
                id,
                User {
                    male,
                    age,
                    occupation,
                },
            )
            .is_some()
        {
            return Err(users.err(line, format!("duplicate user {id}")));
        }
    }

    let mut movie_genres: BTreeMap<u64, (bool, bool)> = BTreeMap::new();
    for row in movies.iter(3) {
        let (line, f) = row?;
        let id: u64 = movies.int(line, f[0], "movie id")?;
        let genres: BTreeSet<&str> = f[2].split('|').map(str::trim).collect();
        if movie_genres
            .insert(id, (genres.contains("Action"), genres.contains("Drama")))
            .is_some()
        {
            return Err(movies.err(line, format!("duplicate movie {id}")));
        }
    }

    let mut ds = Dataset::default();
    ds.populations.insert(
        "user".into(),
        user_rows.keys().map(u64::to_string).collect(),
    );
    ds.populations.insert(
        "movie".into(),
        movie_genres.keys().map(u64::to_string).collect(),
    );

    let mut likes = Vec::new();
    let mut seen = BTreeSet::new();
    for row in ratings.iter(4) {
        let (line, f) = row?;
        let u: u64 = ratings.int(line, f[0], "user id")?;
        let m: u64 = ratings.int(line, f[1], "movie id")?;
        let _: f64 = ratings.int(line, f[2], "rating")?;
        let ts: i64 = ratings.int(line, f[3], "timestamp")?;
        if !user_rows.contains_key(&u) {
            return Err(ratings.err(line, format!("unknown user {u}")));
        }
        if !movie_genres.contains_key(&m) {
            return Err(ratings.err(line, format!("unknown movie {m}")));
        }
        if !seen.insert((u, m)) {
            return Err(ratings.err(line, format!("duplicate rating ({u}, {m})")));
        }
        likes.push(Fact::new(&[&u.to_string(), &m.to_string()], 1.0, Some(ts)));
    }
    ds.facts.insert("Likes".into(), likes);

    let mut unary = |pred: String, obj: u64| {
        ds.facts
            .entry(pred)
            .or_default()
            .push(Fact::new(&[&obj.to_string()], 1.0, None));
    };
    for (&id, &(action, drama)) in &movie_genres {
        if action {
            unary("Action".into(), id);
        }
        if drama {
            unary("Drama".into(), id);
        }
    }
    for (&id, u) in &user_rows {
        unary(format!("Occ{}", u.occupation), id);
        unary(format!("Age{}", u.age), id);
        if u.male {
            unary("Male".into(), id);
        }
    }
    for pred in ["Action", "Drama", "Male"]
        .into_iter()
        .map(String::from)
        .chain((0..OCCUPATIONS).map(|k| format!("Occ{k}")))
        .chain(AGE_CODES.iter().map(|c| format!("Age{c}")))
    {
        ds.facts.entry(pred).or_default();
    }

    for (&id, u) in &user_rows {
        let obj = id.to_string();
        let label = |v: f64| Fact {
            fields: vec![obj.clone(), format!("{v}")],
            line: 0,
        };
        ds.labels
            .entry("Gender".into())
            .or_default()
            .push(label(if u.male { 1.0 } else { 0.0 }));
        ds.labels
            .entry("AgeMid".into())
            .or_default()
            .push(label(age_midpoint(u.age).expect("checked")));
    }
    Ok(ds)
}

/// Writes raw files in the MovieLens-1M format with `users` users and
/// `movies` movies. Men rate action films more often and women drama films,
/// and older users rate more, so gender and age are learnable.
pub fn write_movielens_like(
    dir: &Path,
    users: usize,
    movies: usize,
    seed: u64,
) -> Result<MovieLensFiles, DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = MovieLensFiles::in_dir(dir);
    let mut rng = substream(seed, "movielens-like");

    let mut genres = Vec::with_capacity(movies);
    let mut text = String::new();
    for m in 1..=movies {
        let action = rng.random_bool(0.3);
        let drama = rng.random_bool(0.4);
        let mut g: Vec<&str> = Vec::new();
        if action {
            g.push("Action");
        }
        if drama {
            g.push("Drama");
        }
        if g.is_empty() {
            g.push("Comedy");
        }
        let _ = writeln!(text, "{m}::Movie {m} (19{:02})::{}", m % 100, g.join("|"));
        genres.push((action, drama));
    }
    fs::write(&files.movies, text).map_err(io_err(&files.movies))?;

    let mut profiles = Vec::with_capacity(users);
    let mut text = String::new();
    for u in 1..=users {
        let male = rng.random_bool(0.7);
        let age_idx = rng.random_range(0..AGE_CODES.len());
        let occupation = rng.random_range(0..OCCUPATIONS);
        let _ = writeln!(
            text,
            "{u}::{}::{}::{occupation}::{:05}",
            if male { "M" } else { "F" },
            AGE_CODES[age_idx],
            rng.random_range(0..100_000)
        );
        profiles.push((male, age_idx));
    }
    fs::write(&files.users, text).map_err(io_err(&files.users))?;

    let mut text = String::new();
    for (u, &(male, age_idx)) in profiles.iter().enumerate() {
        let mut ts: i64 = 956_703_932 + rng.random_range(0..1_000_000);
        let base = 0.04 + 0.02 * age_idx as f64;
        for (m, &(action, drama)) in genres.iter().enumerate() {
            let mut p = base;
            if action {
                p += if male { 0.25 } else { 0.02 };
            }
            if drama {
                p += if male { 0.03 } else { 0.25 };
            }
            if rng.random_bool(p.min(1.0)) {
                ts += rng.random_range(1..5000);
                let _ = writeln!(
                    text,
                    "{}::{}::{}::{ts}",
                    u + 1,
                    m + 1,
                    rng.random_range(1..=5)
                );
            }
        }
    }
    fs::write(&files.ratings, text).map_err(io_err(&files.ratings))?;
    Ok(files)
}
