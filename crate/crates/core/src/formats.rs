//! On-disk formats. Binary formats start with an 8-byte magic and are
//! little-endian throughout; text formats are TOML or line based.
//!
//! | magic      | content                      |
//! |------------|------------------------------|
//! | `ANIM0001` | animation clip               |
//! | `DPTH0001` | u16 millimeter depth map     |
//! | `SFLW0001` | f32 scene flow, NaN = invalid|
//! | `SVOX0001` | sparse voxel grid            |
//! | `PMSN0001` | points with motion vectors   |

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnimationClip, Intrinsics, PinholeCamera, RigidTransform, TriangleMesh, Vec3};
use crate::motion_field::PointMotionSet;
use crate::render::{DepthMap, SceneFlowImage};
use crate::volumetric::{GridLayout, PayloadKind, SparseVoxelGrid, VoxelCoord, VoxelPayload};

pub const ANIM_MAGIC: &[u8; 8] = b"ANIM0001";
pub const DEPTH_MAGIC: &[u8; 8] = b"DPTH0001";
pub const FLOW_MAGIC: &[u8; 8] = b"SFLW0001";
pub const SVOX_MAGIC: &[u8; 8] = b"SVOX0001";
pub const PMSN_MAGIC: &[u8; 8] = b"PMSN0001";

/// Reads a whole file; the error names the path.
pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| with_path(e, path))
}

/// Writes a whole file, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| with_path(e, dir))?;
    }
    std::fs::write(path, bytes).map_err(|e| with_path(e, path))
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// f32 widened through its shortest decimal form, so values written from
/// f64 literals such as `0.01` read back as the same f64.
fn widen(v: f32) -> f64 {
    v.to_string().parse().expect("float formatting round-trips")
}

struct Reader<'a> {
    format: &'static str,
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(format: &'static str, bytes: &'a [u8], magic: &[u8; 8]) -> Result<Self> {
        let mut r = Self { format, bytes };
        if r.take(8)? != magic {
            return Err(Error::format(format, "bad magic"));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::format(self.format, "unexpected end of data"));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    fn vec3(&mut self) -> Result<Vec3> {
        Ok(Vec3::new(self.f32()?.into(), self.f32()?.into(), self.f32()?.into()))
    }

    /// Count of records of `record` bytes each, checked against the
    /// remaining data.
    fn count(&mut self, n: u64, record: usize) -> Result<usize> {
        let n = usize::try_from(n).map_err(|_| Error::format(self.format, "count overflows"))?;
        if n.checked_mul(record).is_none_or(|len| len > self.bytes.len()) {
            return Err(Error::format(self.format, format!("{n} records exceed the data size")));
        }
        Ok(n)
    }

    fn finish(self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(Error::format(self.format, format!("{} trailing bytes", self.bytes.len())))
        }
    }
}

fn put_vec3(out: &mut Vec<u8>, v: &Vec3) {
    for c in v.iter() {
        out.extend_from_slice(&(*c as f32).to_le_bytes());
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn len_u32(format: &'static str, n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::format(format, format!("{n} does not fit in 32 bits")))
}

// ---- animation ----

pub fn encode_anim(clip: &AnimationClip) -> Result<Vec<u8>> {
    let mesh = clip.mesh();
    let mut out = ANIM_MAGIC.to_vec();
    put_u32(&mut out, len_u32("ANIM", clip.frame_count())?);
    put_u32(&mut out, len_u32("ANIM", mesh.vertex_count())?);
    put_u32(&mut out, len_u32("ANIM", mesh.triangles().len())?);
    for t in mesh.triangles() {
        t.iter().for_each(|i| put_u32(&mut out, *i));
    }
    for frame in clip.frames() {
        frame.iter().for_each(|p| put_vec3(&mut out, p));
    }
    Ok(out)
}

/// Decoded clips use the default frame rate, which the format does not store.
pub fn decode_anim(bytes: &[u8]) -> Result<AnimationClip> {
    let mut r = Reader::new("ANIM", bytes, ANIM_MAGIC)?;
    let frames = r.u32()? as u64;
    let verts = r.u32()? as u64;
    let tris = r.u32()? as u64;
    let tris = r.count(tris, 12)?;
    let triangles = (0..tris)
        .map(|_| Ok([r.u32()?, r.u32()?, r.u32()?]))
        .collect::<Result<Vec<_>>>()?;
    let total = r.count(frames * verts, 12)?;
    let verts = verts as usize;
    let mut positions = Vec::with_capacity(total);
    for _ in 0..total {
        positions.push(r.vec3()?);
    }
    r.finish()?;
    if frames == 0 || verts == 0 {
        return Err(Error::format("ANIM", "clip has no frames or no vertices"));
    }
    let frames: Vec<Vec<Vec3>> = positions.chunks(verts).map(<[Vec3]>::to_vec).collect();
    let mesh = TriangleMesh::new(frames[0].clone(), triangles).map_err(|e| Error::format("ANIM", e.to_string()))?;
    AnimationClip::from_frames(mesh, frames)
}

// ---- OBJ ----

pub fn encode_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

/// Positions and faces only. Polygons are fan-triangulated; texture and
/// normal indices are ignored; negative indices count from the end.
pub fn decode_obj(text: &str) -> Result<TriangleMesh> {
    let err = |line: usize, msg: &str| Error::format("OBJ", format!("line {}: {msg}", line + 1));
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse().map_err(|_| err(n, "bad coordinate")))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err(n, "vertex needs three coordinates"));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = tok
                    .map(|t| {
                        let i: i64 = t.split('/').next().unwrap_or("").parse().map_err(|_| err(n, "bad face index"))?;
                        let i = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        u32::try_from(i).map_err(|_| err(n, "face index out of range"))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err(n, "face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| Error::format("OBJ", e.to_string()))
}

/// OBJ text or an ANIM clip (frame `frame`, default 0), told apart by magic.
pub fn decode_mesh(bytes: &[u8], frame: Option<usize>) -> Result<TriangleMesh> {
    if bytes.starts_with(ANIM_MAGIC) {
        decode_anim(bytes)?.frame_mesh(frame.unwrap_or(0))
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::format("OBJ", "not UTF-8 text"))?;
        decode_obj(text)
    }
}

// ---- depth and flow ----

pub fn encode_depth(depth: &DepthMap) -> Vec<u8> {
    let mut out = DEPTH_MAGIC.to_vec();
    put_u32(&mut out, depth.width());
    put_u32(&mut out, depth.height());
    for v in depth.to_millimeters() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Raw millimeters with their image size.
pub fn decode_depth_mm(bytes: &[u8]) -> Result<(u32, u32, Vec<u16>)> {
    let mut r = Reader::new("DPTH", bytes, DEPTH_MAGIC)?;
    let (w, h) = (r.u32()?, r.u32()?);
    let n = r.count(w as u64 * h as u64, 2)?;
    let mm = (0..n).map(|_| r.u16()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok((w, h, mm))
}

pub fn decode_depth(bytes: &[u8], camera: PinholeCamera) -> Result<DepthMap> {
    let (w, h, mm) = decode_depth_mm(bytes)?;
    if (w, h) != (camera.width(), camera.height()) {
        return Err(Error::format(
            "DPTH",
            format!("{w}x{h} image for a {}x{} camera", camera.width(), camera.height()),
        ));
    }
    DepthMap::from_millimeters(camera, &mm)
}

pub fn encode_flow(flow: &SceneFlowImage) -> Vec<u8> {
    let mut out = FLOW_MAGIC.to_vec();
    put_u32(&mut out, flow.width);
    put_u32(&mut out, flow.height);
    for f in flow.vectors() {
        put_vec3(&mut out, &f.unwrap_or(Vec3::repeat(f64::NAN)));
    }
    out
}

pub fn decode_flow(bytes: &[u8]) -> Result<SceneFlowImage> {
    let mut r = Reader::new("SFLW", bytes, FLOW_MAGIC)?;
    let (w, h) = (r.u32()?, r.u32()?);
    let n = r.count(w as u64 * h as u64, 12)?;
    let mut flow = Vec::with_capacity(n);
    for _ in 0..n {
        let v = r.vec3()?;
        let nan = v.iter().filter(|c| c.is_nan()).count();
        flow.push(match nan {
            0 => Some(v),
            3 => None,
            _ => return Err(Error::format("SFLW", "partially invalid flow vector")),
        });
    }
    r.finish()?;
    SceneFlowImage::new(w, h, flow).map_err(|e| Error::format("SFLW", e.to_string()))
}

// ---- camera sidecar ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraFile {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    /// Camera-to-world, row-major.
    camera_to_world: [[f64; 4]; 4],
}

pub fn encode_camera(camera: &PinholeCamera) -> String {
    let i = camera.intrinsics;
    let m = camera.pose().to_matrix4();
    let file = CameraFile {
        fx: i.fx,
        fy: i.fy,
        cx: i.cx,
        cy: i.cy,
        width: i.width,
        height: i.height,
        camera_to_world: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
    };
    toml::to_string(&file).expect("camera serializes")
}

pub fn decode_camera(text: &str) -> Result<PinholeCamera> {
    let f: CameraFile = toml::from_str(text).map_err(|e| Error::format("camera", e.to_string()))?;
    let intrinsics = Intrinsics {
        fx: f.fx,
        fy: f.fy,
        cx: f.cx,
        cy: f.cy,
        width: f.width,
        height: f.height,
    };
    let pose = RigidTransform::from_matrix4(&Matrix4::from_fn(|r, c| f.camera_to_world[r][c]))?;
    PinholeCamera::new(intrinsics, pose)
}

// ---- sparse voxel grids ----

/// Payload encoding inside SVOX records.
pub trait SvoxPayload: VoxelPayload {
    /// Bytes per payload.
    const SIZE: usize;
    fn put(&self, out: &mut Vec<u8>);
    /// `bytes` has exactly `SIZE` bytes.
    fn decode(bytes: &[u8]) -> Self;
}

fn f32_at(bytes: &[u8], i: usize) -> f64 {
    f32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes")).into()
}

impl SvoxPayload for f64 {
    const SIZE: usize = 4;
    fn put(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(*self as f32).to_le_bytes());
    }
    fn decode(bytes: &[u8]) -> Self {
        f32_at(bytes, 0)
    }
}

impl SvoxPayload for Vec3 {
    const SIZE: usize = 12;
    fn put(&self, out: &mut Vec<u8>) {
        put_vec3(out, self);
    }
    fn decode(bytes: &[u8]) -> Self {
        Vec3::new(f32_at(bytes, 0), f32_at(bytes, 1), f32_at(bytes, 2))
    }
}

pub fn encode_svox<T: SvoxPayload>(grid: &SparseVoxelGrid<T>) -> Vec<u8> {
    let mut out = SVOX_MAGIC.to_vec();
    out.push(T::KIND as u8);
    out.extend_from_slice(&(grid.layout.voxel_size as f32).to_le_bytes());
    put_vec3(&mut out, &grid.layout.origin);
    out.extend_from_slice(&(grid.len() as u64).to_le_bytes());
    // BTreeMap order is lexicographic (x, y, z)
    for (c, v) in grid.iter() {
        c.iter().for_each(|k| out.extend_from_slice(&k.to_le_bytes()));
        v.put(&mut out);
    }
    out
}

/// Payload kind stored in an SVOX header.
pub fn svox_kind(bytes: &[u8]) -> Result<PayloadKind> {
    let mut r = Reader::new("SVOX", bytes, SVOX_MAGIC)?;
    match r.u8()? {
        0 => Ok(PayloadKind::Tsdf),
        1 => Ok(PayloadKind::Motion),
        k => Err(Error::format("SVOX", format!("unknown payload kind {k}"))),
    }
}

pub fn decode_svox<T: SvoxPayload>(bytes: &[u8]) -> Result<SparseVoxelGrid<T>> {
    let mut r = Reader::new("SVOX", bytes, SVOX_MAGIC)?;
    let kind = r.u8()?;
    if kind != T::KIND as u8 {
        return Err(Error::format("SVOX", format!("payload kind {kind}, expected {}", T::KIND as u8)));
    }
    let voxel_size = widen(r.f32()?);
    let origin = Vec3::new(widen(r.f32()?), widen(r.f32()?), widen(r.f32()?));
    let layout = GridLayout::new(voxel_size, origin).map_err(|e| Error::format("SVOX", e.to_string()))?;
    let count = r.u64()?;
    let n = r.count(count, 12 + T::SIZE)?;
    let mut entries: Vec<(VoxelCoord, T)> = Vec::with_capacity(n);
    for _ in 0..n {
        let c = [r.i32()?, r.i32()?, r.i32()?];
        if entries.last().is_some_and(|(prev, _)| *prev >= c) {
            return Err(Error::format("SVOX", "entries are not sorted and unique"));
        }
        entries.push((c, T::decode(r.take(T::SIZE)?)));
    }
    r.finish()?;
    SparseVoxelGrid::from_entries(layout, entries).map_err(|e| Error::format("SVOX", e.to_string()))
}

// ---- point motion sets ----

pub fn encode_pmsn(set: &PointMotionSet) -> Vec<u8> {
    let mut out = PMSN_MAGIC.to_vec();
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for (p, m) in set.points().iter().zip(set.motions()) {
        put_vec3(&mut out, p);
        put_vec3(&mut out, m);
    }
    out
}

pub fn decode_pmsn(bytes: &[u8]) -> Result<PointMotionSet> {
    let mut r = Reader::new("PMSN", bytes, PMSN_MAGIC)?;
    let count = r.u64()?;
    let n = r.count(count, 24)?;
    let (mut points, mut motions) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        points.push(r.vec3()?);
        motions.push(r.vec3()?);
    }
    r.finish()?;
    PointMotionSet::new(points, motions).map_err(|e| Error::format("PMSN", e.to_string()))
}

// ---- visible index lists ----

pub fn encode_indices(indices: &[u32]) -> String {
    indices.iter().map(|i| format!("{i}\n")).collect()
}

/// One index per line; blank lines and `#` comments are skipped.
pub fn decode_indices(text: &str) -> Result<Vec<u32>> {
    text.lines()
        .enumerate()
        .map(|(n, l)| (n, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, l)| {
            l.parse()
                .map_err(|_| Error::format("index list", format!("line {}: `{l}` is not an index", n + 1)))
        })
        .collect()
}
