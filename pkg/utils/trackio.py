"""
轨迹文件读写 - camera,frame,id,x1,y1,x2,y2,score 格式与外观特征旁路文件
"""

import logging
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from core.errors import DataError
from core.types import BoxPx, FrameRef, TargetObs, Trajectory, sort_members


logger = logging.getLogger(__name__)

TRACK_HEADER = 'camera,frame,id,x1,y1,x2,y2,score'
SAVE_FORMAT = '{camera},{frame},{id},{x1:.6f},{y1:.6f},{x2:.6f},{y2:.6f},{score:.6f}\n'
APP_SUFFIX = '.app.npy'


@dataclass(frozen=True)
class TrackRecord:
    camera: int
    frame: int
    id: Optional[int]
    box: BoxPx
    score: float = 1.0


# ==================== 写 ====================

def write_tracks(filename: str, records: Iterable[TrackRecord]) -> int:
    """写轨迹文件，返回记录数"""
    directory = os.path.dirname(filename)
    if directory:
        os.makedirs(directory, exist_ok=True)
    count = 0
    with open(filename, 'w', encoding='utf-8', newline='\n') as f:
        f.write(TRACK_HEADER + '\n')
        for rec in records:
            f.write(SAVE_FORMAT.format(
                camera=rec.camera, frame=rec.frame, id=-1 if rec.id is None else rec.id,
                x1=rec.box.x1, y1=rec.box.y1, x2=rec.box.x2, y2=rec.box.y2, score=rec.score,
            ))
            count += 1
    logger.info(f"Saved {count} records to {filename}")
    return count


def records_from_trajectories(trajectories: Iterable[Trajectory]) -> List[TrackRecord]:
    """按 (frame, camera, id) 排序的记录"""
    records = []
    for traj in trajectories:
        scores = traj.scores or [1.0] * len(traj.members)
        for (frame, box), score in zip(traj.members, scores):
            records.append(TrackRecord(camera=frame.camera, frame=frame.time, id=traj.id, box=box, score=score))
    records.sort(key=lambda r: (r.frame, r.camera, r.id))
    return records


def records_from_detections(observations: Sequence[TargetObs],
                            ids: Optional[Sequence[Optional[int]]] = None) -> List[TrackRecord]:
    """检测记录保持输入顺序（与外观旁路文件按行对齐）"""
    ids = ids if ids is not None else [None] * len(observations)
    return [TrackRecord(camera=o.frame.camera, frame=o.frame.time, id=i, box=o.box, score=o.det_score)
            for o, i in zip(observations, ids)]


def appearance_path(detections_path: str) -> str:
    return detections_path + APP_SUFFIX


def write_appearance(detections_path: str, observations: Sequence[TargetObs], d_raw: int) -> str:
    path = appearance_path(detections_path)
    matrix = np.stack([o.app for o in observations]) if observations else np.zeros((0, d_raw))
    with open(path, 'wb') as f:
        np.save(f, matrix.astype('<f8'), allow_pickle=False)
    return path


# ==================== 读 ====================

def _parse_line(line: str, lineno: int, path: str) -> TrackRecord:
    parts = line.strip().split(',')
    if len(parts) != 8:
        raise DataError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
    try:
        camera, frame, ident = int(parts[0]), int(parts[1]), int(parts[2])
        x1, y1, x2, y2, score = (float(v) for v in parts[3:])
    except ValueError as e:
        raise DataError(f"{path}:{lineno}: cannot parse numeric field ({e})") from e
    if camera < 1 or frame < 1:
        raise DataError(f"{path}:{lineno}: camera and frame must be >= 1")
    try:
        box = BoxPx(x1, y1, x2, y2)
    except ValueError as e:
        raise DataError(f"{path}:{lineno}: {e}") from e
    return TrackRecord(camera=camera, frame=frame, id=None if ident < 0 else ident, box=box, score=score)


def read_tracks(path: str) -> List[TrackRecord]:
    """
    读取轨迹文件

    Raises:
        DataError: 文件不存在，或某一行无法解析（信息包含行号）
    """
    if not os.path.exists(path):
        raise DataError(f"Track file not found: {path}")
    records = []
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, start=1):
            if lineno == 1:
                if line.strip() != TRACK_HEADER:
                    raise DataError(f"{path}:1: expected header '{TRACK_HEADER}'")
                continue
            if not line.strip():
                continue
            records.append(_parse_line(line, lineno, path))
    logger.debug(f"Read {len(records)} records from {path}")
    return records


def trajectories_from_records(records: Iterable[TrackRecord]) -> List[Trajectory]:
    """id >= 0 的记录按 id 聚合成轨迹"""
    members: Dict[int, list] = {}
    scores: Dict[int, list] = {}
    for rec in records:
        if rec.id is None:
            continue
        members.setdefault(rec.id, []).append((FrameRef(time=rec.frame, camera=rec.camera), rec.box))
        scores.setdefault(rec.id, []).append(rec.score)
    out = []
    for traj_id in sorted(members):
        sorted_members, sorted_scores = sort_members(members[traj_id], scores[traj_id])
        try:
            out.append(Trajectory(id=traj_id, members=sorted_members, scores=sorted_scores))
        except ValueError as e:
            raise DataError(str(e)) from e
    return out


def read_appearance(detections_path: str, rows: int) -> np.ndarray:
    path = appearance_path(detections_path)
    if not os.path.exists(path):
        raise DataError(f"Appearance sidecar not found: {path}")
    try:
        matrix = np.load(path, allow_pickle=False)
    except ValueError as e:
        raise DataError(f"Cannot read appearance sidecar {path}: {e}") from e
    if matrix.ndim != 2 or matrix.shape[0] != rows:
        raise DataError(f"Appearance sidecar {path} has shape {matrix.shape}, expected {rows} rows")
    return matrix.astype(np.float64)


def read_detections(path: str) -> List[TargetObs]:
    """读取检测文件与外观旁路文件，返回与文件行序一致的检测"""
    records = read_tracks(path)
    app = read_appearance(path, len(records))
    out = []
    for k, rec in enumerate(records):
        if not 0.0 <= rec.score <= 1.0:
            raise DataError(f"{path}: record {k + 1} has score {rec.score} outside [0,1]")
        out.append(TargetObs(box=rec.box, frame=FrameRef(time=rec.frame, camera=rec.camera),
                             app=app[k].copy(), det_score=rec.score))
    return out
