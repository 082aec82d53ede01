"""
이벤트/관측 구간 표 검증

문자열로 읽은 두 표를 검사해 줄 번호와 열이 붙은 TableIssue 목록을 모으고,
검증을 통과한 행만 정규화된 표(window_table, event_table)로 남깁니다.
"""

import logging
from collections import Counter
from typing import List, Optional

import numpy as np
import pandas as pd

from .errors import TableIssue

logger = logging.getLogger(__name__)

EVENT_COLUMNS = ["realization", "type", "time"]
WINDOW_COLUMNS = ["realization", "t_minus", "t_plus"]


class EventTableValidator:
    """이벤트/관측 구간 표 검증기

    표는 문자열로 읽은 DataFrame 이며, 행 번호는 파일 줄 번호 (헤더와 버전 줄 포함) 로 보고합니다.
    """

    # 한 분류에서 보고할 최대 문제 수 (큰 파일에서 로그 폭주 방지)
    MAX_REPORTS = 20

    def __init__(self, events: pd.DataFrame, windows: pd.DataFrame, d: int,
                 events_first_line: int = 2, windows_first_line: int = 2, sort_events: bool = False):
        self.events = events
        self.windows = windows
        self.d = d
        self.first_line = {"events": events_first_line, "windows": windows_first_line}
        self.sort_events = sort_events
        self.issues: List[TableIssue] = []
        self.notes: List[TableIssue] = []
        self.counts: Counter = Counter()
        # 검증 후 채워지는 정규화된 열
        self.window_table: Optional[pd.DataFrame] = None
        self.event_table: Optional[pd.DataFrame] = None

    @property
    def is_valid(self) -> bool:
        return not self.counts

    def add_issue(self, kind: str, table: str, message: str, row: Optional[int] = None,
                  column: Optional[str] = None, realization: Optional[int] = None):
        """문제 추가. row 는 표 안의 0 기반 행 번호이며 파일 줄 번호로 바꿔 기록합니다."""
        self.counts[kind] += 1
        if self.counts[kind] > self.MAX_REPORTS:
            return
        line = None if row is None else int(row) + self.first_line[table]
        issue = TableIssue(kind, table, message, line, column, realization)
        self.issues.append(issue)
        logger.error(f"[검증 오류] {kind} ({table}, 줄 {line}, 열 {column}): {message}")

    def validate_all(self) -> List[TableIssue]:
        """모든 검증을 수행하고 보고된 문제 목록을 반환"""
        logger.info("이벤트 파일 검증 시작...")
        self.validate_columns()
        if self.is_valid:
            self.validate_windows()
        if self.is_valid:
            self.validate_events()
        for kind, count in self.counts.items():
            if count > self.MAX_REPORTS:
                logger.warning(f"[검증 경고] {kind} 문제 {count - self.MAX_REPORTS}건은 생략했습니다.")
        if self.is_valid:
            logger.info(f"이벤트 파일 검증 완료: 실현 {len(self.window_table)}개, 이벤트 {len(self.event_table)}개")
        else:
            logger.error(f"이벤트 파일 검증 실패: {sum(self.counts.values())}개의 문제 발견")
        return self.issues

    def validate_columns(self):
        for name, table, expected in (("events", self.events, EVENT_COLUMNS), ("windows", self.windows, WINDOW_COLUMNS)):
            found = [str(c) for c in table.columns]
            if found != expected:
                missing = [c for c in expected if c not in found]
                self.add_issue("malformed_row", name, f"헤더가 {','.join(expected)} 가 아닙니다: {','.join(found)}",
                               column=missing[0] if missing else None)

    @staticmethod
    def _numeric(table: pd.DataFrame, column: str, integer: bool) -> pd.Series:
        values = pd.to_numeric(table[column], errors="coerce")
        if integer:
            values = values.where(values == np.floor(values))
        return values.astype(float).where(lambda v: np.isfinite(v))

    def _report_malformed(self, name: str, table: pd.DataFrame, parsed: dict):
        """해석할 수 없는 행마다 처음 실패한 열을 기록하고 실패 마스크를 반환"""
        frame = pd.DataFrame(parsed)
        bad = frame.isna()
        for idx in np.flatnonzero(bad.any(axis=1).to_numpy()):
            column = frame.columns[bad.iloc[idx].to_numpy()][0]
            self.add_issue("malformed_row", name, f"{column} 값 {table[column].iloc[idx]!r} 을 해석할 수 없습니다.",
                           row=idx, column=column)
        return bad.any(axis=1)

    def validate_windows(self):
        ids = self._numeric(self.windows, "realization", integer=True)
        t_minus = self._numeric(self.windows, "t_minus", integer=False)
        t_plus = self._numeric(self.windows, "t_plus", integer=False)
        bad = self._report_malformed("windows", self.windows,
                                     {"realization": ids, "t_minus": t_minus, "t_plus": t_plus})
        good = ~bad
        for idx in np.flatnonzero((good & (t_plus < t_minus)).to_numpy()):
            self.add_issue("malformed_row", "windows", "t_plus < t_minus", row=idx, column="t_plus",
                           realization=int(ids.iloc[idx]))
        for idx in np.flatnonzero((good & ids.duplicated(keep="first")).to_numpy()):
            self.add_issue("malformed_row", "windows", f"실현 {int(ids.iloc[idx])} 이 중복되었습니다.",
                           row=idx, column="realization", realization=int(ids.iloc[idx]))
        self.window_table = pd.DataFrame({"realization": ids, "t_minus": t_minus, "t_plus": t_plus})

    def validate_events(self):
        ids = self._numeric(self.events, "realization", integer=True)
        types = self._numeric(self.events, "type", integer=True)
        times = self._numeric(self.events, "time", integer=False)
        malformed = self._report_malformed("events", self.events,
                                           {"realization": ids, "type": types, "time": times}).to_numpy()

        windows = self.window_table.set_index("realization")
        known = ids.isin(windows.index).to_numpy()
        for idx in np.flatnonzero(~malformed & ~known):
            real = int(ids.iloc[idx])
            self.add_issue("unknown_realization", "events", f"windows 에 없는 실현 {real}",
                           row=idx, column="realization", realization=real)

        out_of_range = ~malformed & ((types < 0) | (types >= self.d)).to_numpy()
        for idx in np.flatnonzero(out_of_range):
            self.add_issue("type_out_of_range", "events",
                           f"유형 {int(types.iloc[idx])} 가 0..{self.d - 1} 범위를 벗어났습니다.",
                           row=idx, column="type", realization=int(ids.iloc[idx]))

        ok = ~malformed & known
        lo = ids.where(ok).map(windows["t_minus"]).to_numpy(dtype=float)
        hi = ids.where(ok).map(windows["t_plus"]).to_numpy(dtype=float)
        t = times.to_numpy(dtype=float)
        for idx in np.flatnonzero(ok & ((t < lo) | (t > hi))):
            self.add_issue("time_outside_window", "events", f"시각 {t[idx]} 가 구간 [{lo[idx]}, {hi[idx]}] 밖입니다.",
                           row=idx, column="time", realization=int(ids.iloc[idx]))

        table = pd.DataFrame({"realization": ids, "type": types, "time": times, "row": np.arange(len(ids))})[ok]
        prev = table.groupby("realization", sort=False)["time"].shift()
        for idx in np.flatnonzero((table["time"] < prev).to_numpy()):
            row = table.iloc[idx]
            real = int(row["realization"])
            if self.sort_events:
                line = int(row["row"]) + self.first_line["events"]
                self.notes.append(TableIssue("non_monotone_time", "events", "시각이 감소하여 정렬 후 사용합니다.",
                                             line, "time", real))
                logger.warning(f"[검증 경고] events {line}번째 줄: 실현 {real} 의 시각이 감소하여 정렬합니다.")
            else:
                self.add_issue("non_monotone_time", "events", f"실현 {real} 의 시각이 감소합니다.",
                               row=int(row["row"]), column="time", realization=real)
        if self.sort_events:
            table = table.sort_values(["realization", "time"], kind="stable")
        self.event_table = table.drop(columns="row")
