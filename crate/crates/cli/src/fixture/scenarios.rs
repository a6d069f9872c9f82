//! Built-in fixture scripts.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    Action, Change, CommitSpec, DeclaredTruth, FixtureScript, Integration, LinkSpec, MergeSpec, PrSpec, TicketSpec,
};

/// Names accepted by [`by_name`].
pub const NAMES: &[&str] = &["fig2", "recall", "noise", "cosmetic", "meta", "selection", "random"];

/// Looks up a built-in scenario; `random` uses `seed`.
pub fn by_name(name: &str, seed: u64) -> Option<FixtureScript> {
    Some(match name {
        "fig2" => fig2(),
        "recall" => recall_corpus(),
        "noise" => noise_corpus(),
        "cosmetic" => cosmetic_contract(),
        "meta" => meta_contract(),
        "selection" => selection_contract(),
        "random" => random_history(seed),
        _ => return None,
    })
}

fn strings(lines: &[&str]) -> Vec<String> {
    lines.iter().map(|s| s.to_string()).collect()
}

fn edit(path: &str, at: usize, delete: usize, insert: &[&str]) -> Change {
    Change::Edit {
        path: path.into(),
        at,
        delete,
        insert: strings(insert),
    }
}

fn spec(label: &str, message: &str, changes: Vec<Change>) -> CommitSpec {
    CommitSpec {
        label: Some(label.into()),
        message: message.into(),
        changes,
        ..CommitSpec::default()
    }
}

fn commit(label: &str, message: &str, changes: Vec<Change>) -> Action {
    Action::Commit(spec(label, message, changes))
}

fn pr_commit(pr: u64, label: &str, message: &str, changes: Vec<Change>) -> Action {
    Action::Commit(CommitSpec {
        pr: Some(pr),
        ..spec(label, message, changes)
    })
}

fn bug(key: &str, title: &str) -> Action {
    Action::FileTicket(TicketSpec {
        key: key.into(),
        title: title.into(),
        labels: vec!["bug".into()],
        ..TicketSpec::default()
    })
}

fn close(key: &str) -> Action {
    Action::CloseTicket {
        ticket: key.into(),
        resolution: None,
    }
}

fn merge(pr: u64, strategy: Integration, label: Option<&str>) -> MergeSpec {
    MergeSpec {
        pr,
        strategy,
        label: label.map(str::to_string),
        rebased_labels: Vec::new(),
        message: None,
        extra_changes: Vec::new(),
    }
}

fn script(project: &str, actions: Vec<Action>, fixing: &[(&str, &str)], inducing: &[(&str, &[&str])]) -> FixtureScript {
    FixtureScript {
        project: project.into(),
        github: true,
        jira_keys: Vec::new(),
        bug_labels: vec!["bug".into()],
        variants: Vec::new(),
        actions,
        truth: DeclaredTruth {
            fixing: fixing.iter().map(|(b, f)| (b.to_string(), Some(f.to_string()))).collect(),
            inducing: inducing
                .iter()
                .map(|(f, set)| (f.to_string(), set.iter().map(|s| s.to_string()).collect()))
                .collect(),
            derive_inducing: false,
        },
    }
}

fn java_class(name: &str, body: &[&str]) -> Vec<String> {
    let mut out = vec!["package demo;".to_string(), format!("public class {name} {{")];
    out.extend(body.iter().map(|s| s.to_string()));
    out.push("}".into());
    out
}

fn write_class(path: &str, name: &str, body: &[&str]) -> Change {
    Change::Write {
        path: path.into(),
        lines: java_class(name, body),
    }
}

/// A squash-merged fixing pull request whose diff touches four files, one
/// of which it only inherits from a concurrent main-branch change, tracing
/// back into an earlier squash-merged pull request it links.
///
/// Labels: `c1`..`c7`, `pr1_sus`..`pr3_sus`, `pr1_fix`, `pr2_fix`. Pull
/// request #1 is pr_sus, #2 is pr_fix, issue #3 is the bug.
pub fn fig2() -> FixtureScript {
    let actions = vec![
        commit(
            "c1",
            "Initial import",
            vec![
                write_class("src/A.java", "A", &["    int a() {", "        return 1;", "    }"]),
                write_class(
                    "src/B.java",
                    "B",
                    &[
                        "    int m1(int x) {",
                        "        int y = x + 1;",
                        "        int z = y * 2;",
                        "        return z;",
                        "    }",
                        "    int m2(int x) {",
                        "        int w = x - 1;",
                        "        return w;",
                        "    }",
                    ],
                ),
                write_class("src/C.java", "C", &["    int c() {", "        return 3;", "    }"]),
                write_class(
                    "src/D.java",
                    "D",
                    &["    int d() {", "        int d = 4;", "        return d;", "    }"],
                ),
            ],
        ),
        commit("c2", "Tune C", vec![edit("src/C.java", 4, 1, &["        return 30;"])]),
        Action::OpenPr(PrSpec {
            number: 1,
            title: "Rework arithmetic".into(),
            description: "Adjusts the constants in A and B.".into(),
            commits: vec![
                CommitSpec {
                    pr: Some(1),
                    ..spec("pr1_sus", "Change A", vec![edit("src/A.java", 4, 1, &["        return 2;"])])
                },
                CommitSpec {
                    pr: Some(1),
                    ..spec("pr2_sus", "Change m1", vec![edit("src/B.java", 4, 1, &["        int y = x + 2;"])])
                },
                CommitSpec {
                    pr: Some(1),
                    ..spec("pr3_sus", "Change m2", vec![edit("src/B.java", 9, 1, &["        int w = x - 2;"])])
                },
            ],
            ..PrSpec::default()
        }),
        Action::MergePr(merge(1, Integration::Squash, Some("c3"))),
        commit(
            "c4",
            "Make A executable",
            vec![Change::Chmod {
                path: "src/A.java".into(),
                executable: true,
            }],
        ),
        Action::OpenPr(PrSpec {
            number: 2,
            title: "Null handling in m1".into(),
            description: "Fixes #3".into(),
            links: vec![LinkSpec {
                to: "#1".into(),
                kind: "integrated".into(),
            }],
            ..PrSpec::default()
        }),
        commit("c5", "Scale z", vec![edit("src/B.java", 5, 1, &["        int z = y * 3;"])]),
        Action::FileTicket(TicketSpec {
            key: "#3".into(),
            title: "NPE in B.m1".into(),
            description: "m1 fails for large inputs".into(),
            labels: vec!["bug".into()],
            assignee: Some("alice".into()),
            links: Vec::new(),
        }),
        Action::Commit(CommitSpec {
            author: Some("alice".into()),
            pr: Some(2),
            ..spec(
                "pr1_fix",
                "Fix #3: guard m1 against negative input",
                vec![edit(
                    "src/B.java",
                    4,
                    2,
                    &["        int y = Math.max(x, 0) + 2;", "        int z = y * 3 + 1;"],
                )],
            )
        }),
        pr_commit(2, "pr2_fix", "Touch up C", vec![edit("src/C.java", 4, 1, &["        return 31;"])]),
        commit("c6", "Rename in D", vec![edit("src/D.java", 1, 1, &["package demo.d;"])]),
        Action::MergePr(MergeSpec {
            extra_changes: vec![edit("src/D.java", 5, 1, &["        return d + 1;"])],
            ..merge(2, Integration::Squash, Some("c7"))
        }),
        close("#3"),
    ];
    script("fixture/fig2", actions, &[("#3", "c7")], &[("c7", &["c3"])])
}

/// Forty bugs, each fixed by a one-commit pull request whose description
/// says `Fixes #N`. Merge strategies rotate; two in five fixing commits do
/// not mention the bug.
pub fn recall_corpus() -> FixtureScript {
    let mut actions = Vec::new();
    let mut setup = Vec::new();
    for i in 0..40 {
        setup.push(write_class(
            &format!("src/R{i}.java"),
            &format!("R{i}"),
            &["    int v() {", &format!("        return {i};"), "    }"],
        ));
    }
    actions.push(commit("base", "Initial import", setup));
    let mut fixing = Vec::new();
    for i in 0..40u64 {
        let issue = 2 * i + 1;
        let pr = 2 * i + 2;
        let keyed = !matches!(i % 5, 1 | 3);
        let strategy = match i % 3 {
            0 => Integration::Merge,
            1 => Integration::Squash,
            _ => Integration::Rebase,
        };
        actions.push(bug(&format!("#{issue}"), &format!("Wrong value from R{i}")));
        let message = if keyed {
            format!("Fix #{issue}: correct R{i}")
        } else {
            format!("Correct the value of R{i}")
        };
        let inner = format!("inner{i}");
        actions.push(Action::OpenPr(PrSpec {
            number: pr,
            title: format!("Correct R{i}"),
            description: format!("Fixes #{issue}"),
            commits: vec![CommitSpec {
                pr: Some(pr),
                ..spec(
                    &inner,
                    &message,
                    vec![edit(&format!("src/R{i}.java"), 4, 1, &[&format!("        return {i} + 1;")])],
                )
            }],
            ..PrSpec::default()
        }));
        let landed = match strategy {
            Integration::Merge => {
                actions.push(Action::MergePr(merge(pr, strategy, Some(&format!("merge{i}")))));
                inner
            }
            Integration::Squash => {
                let l = format!("squash{i}");
                actions.push(Action::MergePr(merge(pr, strategy, Some(&l))));
                l
            }
            Integration::Rebase => {
                let l = format!("rebased{i}");
                actions.push(Action::MergePr(MergeSpec {
                    rebased_labels: vec![l.clone()],
                    ..merge(pr, strategy, None)
                }));
                l
            }
        };
        actions.push(close(&format!("#{issue}")));
        fixing.push((format!("#{issue}"), landed));
    }
    let fixing: Vec<(&str, &str)> = fixing.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let mut s = script("fixture/recall", actions, &fixing, &[]);
    s.truth.derive_inducing = true;
    s
}

/// Thirty fixes, each changing two lines last touched by one true inducing
/// commit, with one line's history polluted by a cosmetic reindent, a change
/// made after the bug report, or a preparatory commit inside the fixing pull
/// request.
pub fn noise_corpus() -> FixtureScript {
    let mut actions = Vec::new();
    let mut setup = Vec::new();
    for i in 0..30 {
        setup.push(write_class(
            &format!("src/N{i}.java"),
            &format!("N{i}"),
            &[
                "    int run(int x) {",
                "        int a = x;",
                "        int b = a;",
                "        return a + b;",
                "    }",
            ],
        ));
    }
    actions.push(commit("base", "Initial import", setup));
    let mut fixing = Vec::new();
    let mut inducing = Vec::new();
    let mut next_number = 1u64;
    for i in 0..30u64 {
        let path = format!("src/N{i}.java");
        let issue = next_number;
        next_number += 1;
        let key = format!("#{issue}");
        let l1 = format!("        int a = x * {};", i + 2);
        let l2 = format!("        int b = a - {};", i + 1);
        let ind = format!("ind{i}");
        actions.push(commit(&ind, &format!("Rework N{i}"), vec![edit(&path, 4, 2, &[&l1, &l2])]));
        let fixed1 = format!("        int a = Math.abs(x) * {};", i + 2);
        let fixed2 = format!("        int b = Math.abs(a) - {};", i + 1);
        let fix = format!("fix{i}");
        match i % 3 {
            0 => {
                actions.push(commit(&format!("noise{i}"), "Reindent", vec![edit(&path, 4, 1, &[&format!("\t{}", l1.trim())])]));
                actions.push(bug(&key, &format!("Overflow in N{i}")));
                actions.push(commit(&fix, &format!("Fix {key}"), vec![edit(&path, 4, 2, &[&fixed1, &fixed2])]));
            }
            1 => {
                actions.push(bug(&key, &format!("Overflow in N{i}")));
                let noisy = format!("        int a = x * {} + 0;", i + 2);
                actions.push(commit(&format!("noise{i}"), "Refactor", vec![edit(&path, 4, 1, &[&noisy])]));
                actions.push(commit(&fix, &format!("Fix {key}"), vec![edit(&path, 4, 2, &[&fixed1, &fixed2])]));
            }
            _ => {
                let pr = next_number;
                next_number += 1;
                let prep = format!("        int a = (x) * {};", i + 2);
                actions.push(Action::OpenPr(PrSpec {
                    number: pr,
                    title: format!("Harden N{i}"),
                    description: format!("Fixes {key}"),
                    commits: vec![CommitSpec {
                        pr: Some(pr),
                        ..spec(&format!("noise{i}"), "Prepare", vec![edit(&path, 4, 1, &[&prep])])
                    }],
                    ..PrSpec::default()
                }));
                actions.push(bug(&key, &format!("Overflow in N{i}")));
                actions.push(pr_commit(pr, &fix, &format!("Fix {key}"), vec![edit(&path, 4, 2, &[&fixed1, &fixed2])]));
                actions.push(Action::MergePr(merge(pr, Integration::Merge, Some(&format!("merge{i}")))));
            }
        }
        actions.push(close(&key));
        fixing.push((key, fix.clone()));
        inducing.push((fix, ind));
    }
    let fixing: Vec<(&str, &str)> = fixing.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let inducing_sets: Vec<(String, [&str; 1])> = inducing.iter().map(|(f, i)| (f.clone(), [i.as_str()])).collect();
    let inducing: Vec<(&str, &[&str])> = inducing_sets.iter().map(|(f, s)| (f.as_str(), &s[..])).collect();
    script("fixture/noise", actions, &fixing, &inducing)
}

/// A whitespace-only commit reindents one of the two lines an inducing
/// commit changed before a fix rewrites both.
pub fn cosmetic_contract() -> FixtureScript {
    let actions = vec![
        commit(
            "c1",
            "Initial import",
            vec![write_class(
                "src/K.java",
                "K",
                &["    int k(int x) {", "        int y = x;", "        return y;", "    }"],
            )],
        ),
        commit(
            "inducer",
            "Scale k",
            vec![edit("src/K.java", 4, 2, &["        int y = x * 2;", "        return y + 1;"])],
        ),
        commit("whitespace", "Reformat", vec![edit("src/K.java", 4, 1, &["          int y = x * 2;"])]),
        bug("#1", "k overflows"),
        commit(
            "fix",
            "Fix #1",
            vec![edit(
                "src/K.java",
                4,
                2,
                &["        int y = Math.multiplyExact(x, 2);", "        return Math.addExact(y, 1);"],
            )],
        ),
        close("#1"),
    ];
    script("fixture/cosmetic", actions, &[("#1", "fix")], &[("fix", &["inducer"])])
}

/// An evil merge and a permission-only commit around the lines a fix
/// changes.
pub fn meta_contract() -> FixtureScript {
    let body = [
        "    int m(int x) {",
        "        int a = x;",
        "        int b = x;",
        "        int c = x;",
        "        return a + b + c;",
        "    }",
    ];
    let actions = vec![
        commit("c1", "Initial import", vec![write_class("src/M.java", "M", &body)]),
        commit("main_change", "Adjust a", vec![edit("src/M.java", 4, 1, &["        int a = x + 1;"])]),
        Action::OpenPr(PrSpec {
            number: 1,
            title: "Adjust b".into(),
            commits: vec![CommitSpec {
                pr: Some(1),
                ..spec("branch_change", "Adjust b", vec![edit("src/M.java", 5, 1, &["        int b = x + 2;"])])
            }],
            ..PrSpec::default()
        }),
        Action::MergePr(MergeSpec {
            extra_changes: vec![edit("src/M.java", 6, 1, &["        int c = x + 3;"])],
            ..merge(1, Integration::Merge, Some("evil_merge"))
        }),
        commit(
            "chmod",
            "Make M executable",
            vec![Change::Chmod {
                path: "src/M.java".into(),
                executable: true,
            }],
        ),
        bug("#2", "m is off"),
        commit(
            "fix",
            "Fix #2",
            vec![edit(
                "src/M.java",
                4,
                3,
                &["        int a = x + 10;", "        int b = x + 20;", "        int c = x + 30;"],
            )],
        ),
        close("#2"),
    ];
    script(
        "fixture/meta",
        actions,
        &[("#2", "fix")],
        &[("fix", &["main_change", "branch_change"])],
    )
}

/// An old large change and a recent one-line change both precede a fix.
pub fn selection_contract() -> FixtureScript {
    let old: Vec<String> = (0..8).map(|i| format!("        int v{i} = x + {i};")).collect();
    let new: Vec<String> = (0..8).map(|i| format!("        int v{i} = x * {i};")).collect();
    let mut body = vec!["    int s(int x) {".to_string()];
    body.extend(old.iter().cloned());
    body.push("        return v0 + v7;".into());
    body.push("    }".into());
    let body_refs: Vec<&str> = body.iter().map(String::as_str).collect();
    let new_refs: Vec<&str> = new.iter().map(String::as_str).collect();
    let actions = vec![
        commit("c1", "Initial import", vec![write_class("src/S.java", "S", &body_refs)]),
        commit("large", "Rework s", vec![edit("src/S.java", 4, 8, &new_refs)]),
        commit("small", "Tweak v7", vec![edit("src/S.java", 11, 1, &["        int v7 = x * 70;"])]),
        bug("#1", "s is wrong"),
        commit(
            "fix",
            "Fix #1",
            vec![
                edit("src/S.java", 4, 1, &["        int v0 = x * 100;"]),
                edit("src/S.java", 11, 1, &["        int v7 = x * 700;"]),
            ],
        ),
        close("#1"),
    ];
    script("fixture/selection", actions, &[("#1", "fix")], &[("fix", &["large", "small"])])
}

/// A random linear history of unique lines with some fixing commits; the
/// inducing truth is derived from the provenance replay.
pub fn random_history(seed: u64) -> FixtureScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counter = 0usize;
    let mut fresh = |n: usize| -> Vec<String> {
        (0..n)
            .map(|_| {
                counter += 1;
                format!("value_{seed}_{counter} = {counter};")
            })
            .collect()
    };
    let file_count = rng.random_range(1..=3);
    let mut files: BTreeMap<String, usize> = BTreeMap::new();
    let mut changes = Vec::new();
    for f in 0..file_count {
        let n = rng.random_range(4..=12);
        let path = format!("src/f{f}.txt");
        changes.push(Change::Write {
            path: path.clone(),
            lines: fresh(n),
        });
        files.insert(path, n);
    }
    let mut actions = vec![Action::Commit(spec("c0", "Initial import", changes))];
    let commits = rng.random_range(8..=30);
    let mut fixing = Vec::new();
    let mut issue = 0u64;
    for c in 1..commits {
        let label = format!("c{c}");
        let paths: Vec<String> = files.keys().cloned().collect();
        if rng.random_bool(0.08) {
            let from = paths[rng.random_range(0..paths.len())].clone();
            let to = format!("src/moved{c}.txt");
            let n = files.remove(&from).unwrap_or(0);
            files.insert(to.clone(), n);
            actions.push(commit(&label, "Move file", vec![Change::Rename { from, to }]));
            continue;
        }
        let is_fix = c >= 3 && rng.random_bool(0.35);
        let touched: BTreeSet<String> = (0..rng.random_range(1..=paths.len()))
            .map(|_| paths[rng.random_range(0..paths.len())].clone())
            .collect();
        let mut changes = Vec::new();
        for path in touched {
            let len = files[&path];
            let ops = rng.random_range(1..=2);
            let mut len_now = len;
            for _ in 0..ops {
                let delete = if len_now == 0 {
                    0
                } else if is_fix {
                    rng.random_range(1..=len_now.min(3))
                } else {
                    rng.random_range(0..=len_now.min(3))
                };
                let insert = if len_now - delete < 2 {
                    rng.random_range(1..=3)
                } else {
                    rng.random_range(0..=3)
                };
                if delete == 0 && insert == 0 {
                    continue;
                }
                let at = rng.random_range(1..=len_now - delete + 1);
                changes.push(Change::Edit {
                    path: path.clone(),
                    at,
                    delete,
                    insert: fresh(insert),
                });
                len_now = len_now - delete + insert;
            }
            files.insert(path, len_now);
        }
        if changes.is_empty() {
            changes.push(Change::Edit {
                path: paths[0].clone(),
                at: 1,
                delete: 0,
                insert: fresh(1),
            });
            *files.get_mut(&paths[0]).expect("known path") += 1;
        }
        let removes = changes.iter().any(|ch| matches!(ch, Change::Edit { delete, .. } if *delete > 0));
        if is_fix && removes {
            issue += 1;
            let key = format!("#{issue}");
            actions.push(bug(&key, "Random failure"));
            actions.push(commit(&label, &format!("Fix {key}"), changes));
            actions.push(close(&key));
            fixing.push((key, label));
        } else {
            actions.push(commit(&label, "Change values", changes));
        }
    }
    let fixing: Vec<(&str, &str)> = fixing.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let mut s = script(&format!("fixture/random-{seed}"), actions, &fixing, &[]);
    s.truth.derive_inducing = true;
    s.variants = vec!["B".into()];
    s
}
