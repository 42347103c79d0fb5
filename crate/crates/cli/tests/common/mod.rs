//! Shared fixtures for the HTTP scenarios: image directories, a real server
//! process, and a small JSON client.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use doorsense_core::annot::{AnnotationSession, Provenance};
use doorsense_core::{BBox, DoorStatus, GroundTruthBox};

pub const W: usize = 64;
pub const H: usize = 48;

pub fn write_pgm(path: &Path, w: usize, h: usize) {
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend((0..w * h).map(|i| (i % 251) as u8));
    std::fs::write(path, bytes).unwrap();
}

/// A directory with one `W`x`H` PGM per timestamp.
pub fn session_dir(stamps_ms: &[u64]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for t in stamps_ms {
        write_pgm(&dir.path().join(format!("{t}.pgm")), W, H);
    }
    dir
}

pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(dir: &Path, period: f64) -> Server {
        let mut child = Command::new(env!("CARGO_BIN_EXE_doorsense"))
            .args(["annotate-serve", "--port", "0", "--period", &period.to_string(), "--dir"])
            .arg(dir)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn server");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line
            .strip_prefix("listening on http://")
            .and_then(|rest| rest.split_whitespace().next())
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .to_string();
        Server { child, base: addr }
    }

    /// SIGKILL: no chance to finish an in-flight write.
    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.kill();
    }
}

pub struct Client {
    agent: ureq::Agent,
    base: String,
}

impl Client {
    pub fn new(base: &str) -> Client {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(20)))
            .build()
            .into();
        Client { agent, base: base.to_string() }
    }

    pub fn get(&self, path: &str) -> Result<(u16, Value), String> {
        let mut r = self.agent.get(format!("{}{path}", self.base)).call().map_err(|e| e.to_string())?;
        let text = r.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok((r.status().as_u16(), serde_json::from_str(&text).map_err(|e| format!("{e}: {text}"))?))
    }

    pub fn put_boxes(&self, image_id: &str, boxes: &[GroundTruthBox]) -> Result<(u16, Value), String> {
        self.put_raw(image_id, &json!({ "annotations": boxes }).to_string())
    }

    pub fn put_raw(&self, image_id: &str, body: &str) -> Result<(u16, Value), String> {
        let mut r = self
            .agent
            .put(format!("{}/api/images/{image_id}/annotations", self.base))
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| e.to_string())?;
        let text = r.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok((r.status().as_u16(), serde_json::from_str(&text).map_err(|e| format!("{e}: {text}"))?))
    }

    pub fn export(&self) -> Result<(u16, Value), String> {
        let mut r = self.agent.post(format!("{}/api/export", self.base)).send_empty().map_err(|e| e.to_string())?;
        let text = r.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok((r.status().as_u16(), serde_json::from_str(&text).map_err(|e| format!("{e}: {text}"))?))
    }

    pub fn annotations(&self, image_id: &str) -> Result<(Vec<GroundTruthBox>, String), String> {
        let (status, v) = self.get(&format!("/api/images/{image_id}/annotations"))?;
        if status != 200 {
            return Err(format!("GET {image_id}: status {status}: {v}"));
        }
        let boxes = serde_json::from_value(v["annotations"].clone()).map_err(|e| e.to_string())?;
        Ok((boxes, v["provenance"].as_str().unwrap_or("").to_string()))
    }
}

pub fn gt(image_id: &str, x: f64, y: f64, w: f64, h: f64, label: DoorStatus) -> GroundTruthBox {
    GroundTruthBox { image_id: image_id.to_string(), bbox: BBox { x, y, w, h }, label }
}

/// In-bounds boxes with integer coordinates, so clamping leaves them alone.
pub fn random_boxes(rng: &mut ChaCha8Rng, image_id: &str, max: usize) -> Vec<GroundTruthBox> {
    (0..rng.random_range(0..=max))
        .map(|_| {
            let x = rng.random_range(0..W - 1);
            let y = rng.random_range(0..H - 1);
            let w = rng.random_range(1..=W - x);
            let h = rng.random_range(1..=H - y);
            let label = if rng.random_bool(0.5) { DoorStatus::Open } else { DoorStatus::Closed };
            gt(image_id, x as f64, y as f64, w as f64, h as f64, label)
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn retarget(boxes: &[GroundTruthBox], id: &str) -> Vec<GroundTruthBox> {
    boxes.iter().map(|b| GroundTruthBox { image_id: id.to_string(), ..b.clone() }).collect()
}

/// Saved boxes carry forward to later unsaved frames; reads never touch the store.
pub fn scenario_carry_forward() -> Result<String, String> {
    let dir = session_dir(&[0, 400, 900, 1300, 2500]);
    let server = Server::start(dir.path(), 1.0);
    let c = Client::new(&format!("http://{}", server.base));

    let (_, session) = c.get("/api/session")?;
    let ids: Vec<&str> = session["frames"].as_array().unwrap().iter().map(|f| f["image_id"].as_str().unwrap()).collect();
    ensure(ids == ["0", "1300", "2500"], || format!("sampled frames {ids:?}"))?;

    let (first, prov) = c.annotations("0")?;
    ensure(first.is_empty() && prov == "carried", || format!("fresh first frame: {first:?} {prov}"))?;

    let three = vec![
        gt("0", 1.0, 2.0, 10.0, 20.0, DoorStatus::Open),
        gt("0", 20.0, 5.0, 8.0, 30.0, DoorStatus::Closed),
        gt("0", 40.0, 0.0, 24.0, 48.0, DoorStatus::Open),
    ];
    let (status, ack) = c.put_boxes("0", &three)?;
    ensure(status == 200, || format!("put: {status} {ack}"))?;
    let store = dir.path().join("annotations.json");
    let before = std::fs::read(&store).map_err(|e| e.to_string())?;

    let (saved, prov) = c.annotations("0")?;
    ensure(saved == three && prov == "saved", || format!("read-your-writes: {saved:?} {prov}"))?;
    for id in ["1300", "2500"] {
        let (boxes, prov) = c.annotations(id)?;
        ensure(prov == "carried", || format!("{id}: provenance {prov}"))?;
        ensure(boxes == retarget(&three, id), || format!("{id}: carried {boxes:?}"))?;
    }
    let after = std::fs::read(&store).map_err(|e| e.to_string())?;
    ensure(before == after, || "a read changed the store".into())?;

    let (_, export) = c.export()?;
    let n = export["annotations"].as_array().map_or(0, Vec::len);
    ensure(n == 3 && export["images"].as_array().map_or(0, Vec::len) == 3, || format!("export {export}"))?;
    ensure(
        export["annotations"].as_array().unwrap().iter().all(|a| a["image_id"] == "0"),
        || "carried boxes were exported".into(),
    )?;
    Ok("3 boxes carried to 2 later frames, store untouched by reads".into())
}

/// An explicit empty save marks a door-free frame and stops the carry chain.
pub fn scenario_saved_empty() -> Result<String, String> {
    let dir = session_dir(&[0, 1000, 2000, 3000]);
    let server = Server::start(dir.path(), 1.0);
    let c = Client::new(&format!("http://{}", server.base));
    let boxes = vec![gt("0", 3.0, 4.0, 5.0, 6.0, DoorStatus::Closed)];
    c.put_boxes("0", &boxes)?;
    let (status, _) = c.put_boxes("1000", &[])?;
    ensure(status == 200, || format!("put empty: {status}"))?;

    let (b, prov) = c.annotations("1000")?;
    ensure(b.is_empty() && prov == "saved", || format!("1000: {b:?} {prov}"))?;
    for id in ["2000", "3000"] {
        let (b, prov) = c.annotations(id)?;
        ensure(b.is_empty() && prov == "carried", || format!("{id}: {b:?} {prov}"))?;
    }
    let late = vec![gt("3000", 0.0, 0.0, 64.0, 48.0, DoorStatus::Open)];
    c.put_boxes("3000", &late)?;

    let (_, export) = c.export()?;
    let got: Vec<GroundTruthBox> = serde_json::from_value(export["annotations"].clone()).map_err(|e| e.to_string())?;
    let want: Vec<GroundTruthBox> = boxes.iter().chain(&late).cloned().collect();
    ensure(got == want, || format!("export {got:?}"))?;
    ensure(export["images"].as_array().map_or(0, Vec::len) == 4, || "export lost a frame".into())?;

    // survives a restart
    drop(server);
    let server = Server::start(dir.path(), 1.0);
    let c = Client::new(&format!("http://{}", server.base));
    let (b, prov) = c.annotations("1000")?;
    ensure(b.is_empty() && prov == "saved", || format!("after restart 1000: {b:?} {prov}"))?;
    Ok("empty save breaks the chain and persists across restart".into())
}

/// Concurrent writers to one image: the write acknowledged with the highest
/// revision is what remains, whole.
pub fn scenario_last_write_wins(threads: usize, per_thread: usize, seed: u64) -> Result<String, String> {
    let dir = session_dir(&[0, 1000]);
    let server = Server::start(dir.path(), 1.0);
    let base = format!("http://{}", server.base);
    let acks: Arc<Mutex<Vec<(u64, Vec<GroundTruthBox>)>>> = Arc::default();
    let handles: Vec<_> = (0..threads)
        .map(|t| {
            let (base, acks) = (base.clone(), acks.clone());
            std::thread::spawn(move || -> Result<(), String> {
                let c = Client::new(&base);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (t as u64 + 1) * 0x9e37_79b9);
                for _ in 0..per_thread {
                    let mut boxes = random_boxes(&mut rng, "1000", 6);
                    // keep every payload distinct
                    boxes.push(gt("1000", t as f64, 0.0, 1.0, 1.0, DoorStatus::Open));
                    let (status, v) = c.put_boxes("1000", &boxes)?;
                    ensure(status == 200, || format!("put: {status} {v}"))?;
                    let rev = v["revision"].as_u64().ok_or("ack without revision")?;
                    let echoed: Vec<GroundTruthBox> = serde_json::from_value(v["annotations"].clone()).map_err(|e| e.to_string())?;
                    ensure(echoed == boxes, || "ack does not echo the write".into())?;
                    acks.lock().unwrap().push((rev, boxes));
                }
                Ok(())
            })
        })
        .collect();
    for h in handles {
        h.join().map_err(|_| "writer panicked".to_string())??;
    }
    let mut acks = Arc::try_unwrap(acks).unwrap().into_inner().unwrap();
    acks.sort_by_key(|a| a.0);
    let revs: Vec<u64> = acks.iter().map(|a| a.0).collect();
    let expected: Vec<u64> = (1..=(threads * per_thread) as u64).collect();
    ensure(revs == expected, || format!("revisions not a gapless sequence: {revs:?}"))?;

    let c = Client::new(&base);
    let (final_boxes, prov) = c.annotations("1000")?;
    let winner = &acks.last().unwrap().1;
    ensure(prov == "saved" && &final_boxes == winner, || format!("final state {final_boxes:?} is not the last write"))?;
    drop(server);
    let reopened = AnnotationSession::open(dir.path(), 1.0, None).map_err(|e| e.to_string())?;
    let (disk, _) = reopened.get_annotations("1000").map_err(|e| e.to_string())?;
    ensure(&disk == winner, || "store on disk differs from the last write".into())?;
    Ok(format!("{} concurrent writes, revision {} wins", acks.len(), revs.last().unwrap()))
}

/// Writer streams puts while the server is SIGKILLed at random moments.
/// After each kill the store must parse and hold exactly the state after
/// some prefix of the writes that is at least every acknowledged one and at
/// most one more (the write in flight).
pub fn scenario_crash_recovery(rounds: usize, seed: u64) -> Result<String, String> {
    let ids = ["0", "1000", "2000", "3000"];
    let dir = session_dir(&[0, 1000, 2000, 3000]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model: BTreeMap<String, Vec<GroundTruthBox>> = BTreeMap::new();
    let mut revision = 0u64;
    let (mut total_acked, mut inflight_committed) = (0usize, 0usize);

    for round in 0..rounds {
        let mut server = Server::start(dir.path(), 0.0);
        let base = format!("http://{}", server.base);
        let c = Client::new(&base);
        let (_, session) = c.get("/api/session")?;
        ensure(session["revision"].as_u64() == Some(revision), || format!("round {round}: server sees {session}"))?;

        let attempted: Arc<Mutex<Vec<(String, Vec<GroundTruthBox>)>>> = Arc::default();
        let acked = Arc::new(Mutex::new(Vec::<u64>::new()));
        let writer_seed: u64 = rng.random();
        let writer = {
            let (attempted, acked) = (attempted.clone(), acked.clone());
            std::thread::spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(writer_seed);
                let c = Client::new(&base);
                loop {
                    let id = ids[rng.random_range(0..ids.len())];
                    let boxes = random_boxes(&mut rng, id, 40);
                    attempted.lock().unwrap().push((id.to_string(), boxes.clone()));
                    match c.put_boxes(id, &boxes) {
                        Ok((200, v)) => acked.lock().unwrap().push(v["revision"].as_u64().unwrap_or(0)),
                        _ => break,
                    }
                }
            })
        };
        std::thread::sleep(Duration::from_millis(rng.random_range(5..60)));
        server.kill();
        writer.join().map_err(|_| "writer panicked".to_string())?;

        let attempted = attempted.lock().unwrap().clone();
        let acked = acked.lock().unwrap().clone();
        let expected_acks: Vec<u64> = (revision + 1..=revision + acked.len() as u64).collect();
        ensure(acked == expected_acks, || format!("round {round}: ack revisions {acked:?}"))?;

        let reopened = AnnotationSession::open(dir.path(), 0.0, None)
            .map_err(|e| format!("round {round}: store unreadable after kill: {e}"))?;
        let got = reopened.revision();
        let lo = revision + acked.len() as u64;
        let hi = (lo + 1).min(revision + attempted.len() as u64);
        ensure((lo..=hi).contains(&got), || format!("round {round}: revision {got} outside [{lo}, {hi}]"))?;
        if got > lo {
            inflight_committed += 1;
        }
        for (id, boxes) in &attempted[..(got - revision) as usize] {
            model.insert(id.clone(), boxes.clone());
        }
        for id in ids {
            let (boxes, prov) = reopened.get_annotations(id).map_err(|e| e.to_string())?;
            match model.get(id) {
                Some(want) => ensure(prov == Provenance::Saved && &boxes == want, || {
                    format!("round {round}: image {id} holds {boxes:?}, expected {want:?}")
                })?,
                None => ensure(prov == Provenance::Carried, || format!("round {round}: image {id} saved unexpectedly"))?,
            }
        }
        total_acked += acked.len();
        revision = got;
    }
    ensure(total_acked > 0, || "no write was ever acknowledged".into())?;
    Ok(format!(
        "{rounds} kills, {total_acked} acked writes, {inflight_committed} in-flight writes committed, no torn store"
    ))
}
