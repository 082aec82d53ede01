"""
파일 형식 모듈 - 이벤트/구간 CSV, 엣지 리스트, 모델 문서(XML), 지표 JSON

모든 출력 파일은 첫 줄(또는 루트 속성)에 format_version 을 기록합니다.
    # lowrank-hawkes <종류> format_version=1 [key=value ...]
"""

import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from lxml import etree

from .inference.errors import EventFileError, ModelFileError, NetworkFileError
from .inference.simulate import SyntheticConfig
from .inference.types import EventHistory, Hyperparams, LowRankModel, Network, Realization, TensorPair
from .inference.validator import EVENT_COLUMNS, WINDOW_COLUMNS, EventTableValidator

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
HEADER_PATTERN = re.compile(r"^#\s*lowrank-hawkes\s+(\S+)(.*)$")
FIELD_PATTERN = re.compile(r"(\w+)=(\S+)")
MODEL_ROOT = "lowrank-hawkes-model"

PathLike = Union[str, Path]


def _header_line(kind: str, **fields) -> str:
    extra = "".join(f" {key}={value}" for key, value in fields.items())
    return f"# lowrank-hawkes {kind} format_version={FORMAT_VERSION}{extra}\n"


def read_header(path: PathLike) -> Tuple[Optional[str], Dict[str, str]]:
    """첫 줄의 형식 헤더 (종류, 필드). 헤더가 없으면 (None, {})"""
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline().strip()
    match = HEADER_PATTERN.match(first)
    if not match:
        return None, {}
    fields = dict(FIELD_PATTERN.findall(match.group(2)))
    version = int(fields.get("format_version", FORMAT_VERSION))
    if version > FORMAT_VERSION:
        raise ModelFileError(f"{path}: 지원하지 않는 format_version {version} (최대 {FORMAT_VERSION})")
    return match.group(1), fields


def _read_table(path: PathLike, kind: str) -> Tuple[pd.DataFrame, int, Dict[str, str], List[List[str]]]:
    """버전 줄(있으면)을 건너뛰고 문자열 표로 읽습니다. (표, 첫 데이터 줄 번호, 헤더 필드, 열 수가 틀린 줄)"""
    found, fields = read_header(path)
    if found is not None and found != kind:
        raise EventFileError(f"{path}: {kind} 파일이 아닙니다 (헤더 종류 {found}).")
    skip = 1 if found is not None else 0
    bad_lines: List[List[str]] = []

    def on_bad(line: List[str]):
        bad_lines.append(line)
        return None

    table = pd.read_csv(path, skiprows=skip, dtype=str, keep_default_na=False, engine="python",
                        on_bad_lines=on_bad, skipinitialspace=True)
    return table, skip + 2, fields, bad_lines


def save_events(history: EventHistory, events_path: PathLike, windows_path: PathLike):
    """이벤트 CSV (realization,type,time) 와 구간 CSV (realization,t_minus,t_plus) 를 씁니다."""
    windows = pd.DataFrame({
        "realization": np.arange(history.H),
        "t_minus": [real.t_minus for real in history.realizations],
        "t_plus": [real.t_plus for real in history.realizations],
    })
    events = pd.DataFrame({
        "realization": np.repeat(np.arange(history.H), [real.n for real in history.realizations]).astype(np.int64),
        "type": np.concatenate([real.types for real in history.realizations]) if history.n else np.zeros(0, np.int64),
        "time": np.concatenate([real.times for real in history.realizations]) if history.n else np.zeros(0),
    })
    for path, kind, table in ((events_path, "events", events), (windows_path, "windows", windows)):
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(_header_line(kind, d=history.d) if kind == "events" else _header_line(kind))
            table.to_csv(f, index=False, float_format="%.17g")
    logger.info(f"이벤트 저장: {events_path} (n={history.n}), {windows_path} (H={history.H})")


def load_events(events_path: PathLike, windows_path: PathLike, d: Optional[int] = None,
                sort_events: bool = False) -> EventHistory:
    """이벤트/구간 CSV 를 읽어 검증한 뒤 EventHistory 를 만듭니다.

    Args:
        events_path: 이벤트 CSV
        windows_path: 구간 CSV
        d (int, optional): 유형 수. 없으면 이벤트 헤더의 d, 그것도 없으면 최대 유형 + 1
        sort_events (bool): 실현 내 시각이 감소하면 오류 대신 안정 정렬

    Raises:
        EventFileError: 검증 실패 (issues 에 줄 번호, 열, 분류가 붙은 문제 목록)
    """
    events, ev_first, fields, ev_bad = _read_table(events_path, "events")
    windows, win_first, _, win_bad = _read_table(windows_path, "windows")
    if d is None and "d" in fields:
        d = int(fields["d"])
    if d is None:
        types = pd.to_numeric(events.get("type", pd.Series(dtype=str)), errors="coerce")
        d = int(types.max()) + 1 if types.notna().any() else 1
    validator = EventTableValidator(events, windows, d, ev_first, win_first, sort_events=sort_events)
    for name, bad in (("events", ev_bad), ("windows", win_bad)):
        for line in bad:
            validator.add_issue("malformed_row", name, f"열 수가 맞지 않는 줄: {','.join(line)}")
    issues = validator.validate_all()
    if not validator.is_valid:
        first = issues[0]
        where = f"{first.table} {first.line}번째 줄" if first.line is not None else first.table
        raise EventFileError(f"이벤트 파일 검증 실패 ({sum(validator.counts.values())}건): "
                             f"[{first.kind}] {where}: {first.message}", issues)

    groups = {key: rows for key, rows in validator.event_table.groupby("realization", sort=False)}
    empty = validator.event_table.iloc[:0]
    reals = []
    for row in validator.window_table.sort_values("realization", kind="stable").itertuples(index=False):
        rows = groups.get(row.realization, empty)
        reals.append(Realization(row.t_minus, row.t_plus, rows["time"].to_numpy(dtype=float),
                                 rows["type"].to_numpy(dtype=np.int64)))
    history = EventHistory(d, tuple(reals))
    logger.info(f"이벤트 로드: d={d}, H={history.H}, n={history.n}")
    return history


def save_network(network: Network, path: PathLike):
    src, dst = np.nonzero(network.adjacency)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(_header_line("network", d=network.d))
        pd.DataFrame({"src": src, "dst": dst}).to_csv(f, index=False)


def load_network(path: Optional[PathLike], d: int, self_loops: bool = True, complete: bool = False) -> Network:
    """엣지 리스트 (src,dst) 로부터 네트워크를 만듭니다.

    - path 가 없거나 complete 이면 모든 u≠v 엣지 (대각은 self_loops)
    - 중복 엣지는 경고 후 하나로 합칩니다.
    - self_loops=False 인데 파일에 자기 엣지가 있으면 경고 후 버립니다.
    """
    if complete or path is None:
        return Network.complete(d, self_loops=self_loops)
    try:
        table, first_line, _, bad = _read_table(path, "network")
    except EventFileError as e:
        raise NetworkFileError(str(e)) from e
    if bad or list(table.columns) != ["src", "dst"]:
        raise NetworkFileError(f"{path}: 엣지 리스트 형식은 src,dst 입니다.")
    src = pd.to_numeric(table["src"], errors="coerce")
    dst = pd.to_numeric(table["dst"], errors="coerce")
    malformed = (src.isna() | dst.isna()).to_numpy()
    if malformed.any():
        line = int(np.flatnonzero(malformed)[0]) + first_line
        raise NetworkFileError(f"{path}: {line}번째 줄을 해석할 수 없습니다.")
    edges = np.column_stack([src.to_numpy(dtype=np.int64), dst.to_numpy(dtype=np.int64)])
    unknown = (edges < 0) | (edges >= d)
    if unknown.any():
        bad_id = int(edges[unknown][0])
        raise NetworkFileError(f"{path}: 알 수 없는 노드 ID {bad_id} (d={d})")
    unique = np.unique(edges, axis=0) if edges.size else edges.reshape(0, 2)
    if len(unique) < len(edges):
        logger.warning(f"{path}: 중복 엣지 {len(edges) - len(unique)}개를 합쳤습니다.")
    loops = unique[:, 0] == unique[:, 1]
    if not self_loops and loops.any():
        logger.warning(f"{path}: 자기 엣지 {int(loops.sum())}개는 self_loops=off 정책에 따라 무시합니다.")
        unique = unique[~loops]
    return Network.from_edges(d, [tuple(e) for e in unique], self_loops=self_loops)


def _array_element(parent, tag: str, values: np.ndarray):
    el = etree.SubElement(parent, tag, shape=" ".join(str(s) for s in values.shape))
    el.text = " ".join(repr(float(v)) for v in values.ravel())
    return el


def _read_array(root, tag: str) -> np.ndarray:
    el = root.find(tag)
    if el is None:
        raise ModelFileError(f"모델 문서에 {tag} 요소가 없습니다.")
    try:
        shape = tuple(int(s) for s in el.get("shape", "").split())
        values = np.array([float(v) for v in (el.text or "").split()], dtype=float)
        return values.reshape(shape)
    except ValueError as e:
        raise ModelFileError(f"모델 문서의 {tag} 값을 해석할 수 없습니다: {e}") from e


def save_model(model: LowRankModel, hp: Hyperparams, path: PathLike, report: Optional[Dict[str, Any]] = None):
    """모델 문서 (차원, 하이퍼파라미터, P, 트리거링 계수, 기저율 계수) 를 저장합니다."""
    root = etree.Element(MODEL_ROOT, format_version=str(FORMAT_VERSION),
                         d=str(model.d), r=str(model.r), K=str(model.K))
    params = etree.SubElement(root, "hyperparams")
    for name, value in hp.to_dict().items():
        etree.SubElement(params, "param", name=name, value=repr(value))
    _array_element(root, "projection", model.projection)
    _array_element(root, "excitation", model.excitation)
    _array_element(root, "baseline", model.baseline)
    if report is not None:
        etree.SubElement(root, "report").text = json.dumps(report, sort_keys=True)
    etree.ElementTree(root).write(str(path), pretty_print=True, xml_declaration=True, encoding="utf-8")
    logger.info(f"모델 저장: {path}")


def _parse_param(value: str):
    if value in ("True", "False"):
        return value == "True"
    try:
        return int(value)
    except ValueError:
        return float(value)


def load_model(path: PathLike) -> Tuple[LowRankModel, Hyperparams]:
    try:
        root = etree.parse(str(path)).getroot()
    except (OSError, etree.XMLSyntaxError) as e:
        raise ModelFileError(f"모델 문서 구문 오류: {e}") from e
    if root.tag != MODEL_ROOT:
        raise ModelFileError(f"모델 문서의 루트 요소가 올바르지 않습니다: {root.tag}")
    version = int(root.get("format_version", "0"))
    if version < 1 or version > FORMAT_VERSION:
        raise ModelFileError(f"지원하지 않는 모델 format_version: {version}")
    params = {p.get("name"): _parse_param(p.get("value")) for p in root.iterfind("hyperparams/param")}
    try:
        hp = Hyperparams(**{k: v for k, v in params.items() if k in Hyperparams.__dataclass_fields__})
        model = LowRankModel.from_parts(_read_array(root, "projection"), _read_array(root, "excitation"),
                                        _read_array(root, "baseline"))
    except (TypeError, ValueError) as e:
        raise ModelFileError(f"모델 문서 내용이 올바르지 않습니다: {e}") from e
    if (model.d, model.r, model.K) != (int(root.get("d")), int(root.get("r")), int(root.get("K"))):
        raise ModelFileError("모델 문서의 차원 속성과 배열 모양이 다릅니다.")
    return model, hp


def save_json(data: Dict[str, Any], path: PathLike, kind: str = "metrics"):
    """format_version 과 종류를 포함한 JSON (키 정렬로 결정적 출력)"""
    payload = {"format": f"lowrank-hawkes {kind}", "format_version": FORMAT_VERSION, **data}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def load_json(path: PathLike) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if int(data.get("format_version", 0)) > FORMAT_VERSION:
        raise ModelFileError(f"{path}: 지원하지 않는 format_version {data.get('format_version')}")
    return data


def save_config(cfg: SyntheticConfig, path: PathLike):
    save_json({"config": cfg.to_dict()}, path, kind="synthetic-config")


def load_config(path: PathLike) -> SyntheticConfig:
    return SyntheticConfig.from_dict(load_json(path)["config"])


def save_table(table: pd.DataFrame, path: PathLike, kind: str):
    """결과 표 CSV (첫 줄에 버전 헤더)"""
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(_header_line(kind))
        table.to_csv(f, index=False, float_format="%.17g")


def load_table(path: PathLike) -> pd.DataFrame:
    found, _ = read_header(path)
    return pd.read_csv(path, skiprows=1 if found is not None else 0)


def tensor_tables(tensors: TensorPair) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """디버그용 D 표 (h, m, v, k, value) 와 A 마스크 적용 전 B 표 (h, v, k, value). v = d 는 기저율 슬롯"""
    starts = np.searchsorted(tensors.event_realization, np.arange(tensors.H))
    local = np.arange(tensors.n) - starts[tensors.event_realization] if tensors.n else np.zeros(0, np.int64)
    K = tensors.K
    exc = pd.DataFrame({
        "h": np.repeat(tensors.event_realization[tensors.d_event], K),
        "m": np.repeat(local[tensors.d_event], K),
        "v": np.repeat(tensors.d_source, K),
        "k": np.tile(np.arange(1, K + 1), tensors.d_event.size),
        "value": tensors.d_values.ravel(),
    })
    base = pd.DataFrame({
        "h": np.repeat(tensors.event_realization, K + 1),
        "m": np.repeat(local, K + 1),
        "v": tensors.d,
        "k": np.tile(np.arange(0, K + 1), tensors.n),
        "value": tensors.d_baseline.ravel(),
    })
    d_table = pd.concat([exc, base], ignore_index=True).sort_values(["h", "m", "v", "k"], kind="stable")
    b_exc = pd.DataFrame({
        "h": np.repeat(tensors.b_realization, K),
        "v": np.repeat(tensors.b_source, K),
        "k": np.tile(np.arange(1, K + 1), tensors.b_source.size),
        "value": tensors.b_values.ravel(),
    })
    b_base = pd.DataFrame({
        "h": np.repeat(np.arange(tensors.H), K + 1),
        "v": tensors.d,
        "k": np.tile(np.arange(0, K + 1), tensors.H),
        "value": tensors.b_baseline.ravel(),
    })
    b_table = pd.concat([b_exc, b_base], ignore_index=True).sort_values(["h", "v", "k"], kind="stable")
    return d_table.reset_index(drop=True), b_table.reset_index(drop=True)
