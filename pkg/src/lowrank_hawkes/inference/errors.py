"""
입력 검증 및 수치 처리 관련 예외 정의
"""

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence


class HawkesInputError(ValueError):
    """잘못된 입력(이력, 네트워크, 하이퍼파라미터)에 대한 기본 예외"""


class IndexOutOfRange(HawkesInputError, IndexError):
    """유형/그룹 인덱스가 허용 범위를 벗어난 경우"""


@dataclass(frozen=True)
class TableIssue:
    """이벤트/구간 표의 문제 한 건

    kind: malformed_row, unknown_realization, type_out_of_range, time_outside_window, non_monotone_time
    table: "events" 또는 "windows"
    line: 파일 줄 번호 (버전 줄과 헤더 포함, 1부터). 열 수가 틀린 줄처럼 알 수 없으면 None
    column: 문제가 된 열 이름
    """
    kind: str
    table: str
    message: str
    line: Optional[int] = None
    column: Optional[str] = None
    realization: Optional[int] = None

    def to_dict(self) -> Dict[str, object]:
        return {key: value for key, value in asdict(self).items() if value is not None}


class EventFileError(HawkesInputError):
    """이벤트 파일 검증 실패. 분류된 문제 목록(issues)을 함께 전달합니다."""

    def __init__(self, message: str, issues: Sequence[TableIssue] = ()):
        super().__init__(message)
        self.issues: List[TableIssue] = list(issues)

    def kinds(self) -> List[str]:
        return sorted({issue.kind for issue in self.issues})


class NetworkFileError(HawkesInputError):
    """엣지 리스트 파일 오류"""


class ModelFileError(HawkesInputError):
    """모델 문서 파싱/버전 오류"""


class SimulationError(RuntimeError):
    """시뮬레이션 중단 (이벤트 수 상한 초과 등)"""

    def __init__(self, message: str, realization: Optional[int] = None, count: Optional[int] = None):
        super().__init__(message)
        self.realization = realization
        self.count = count
