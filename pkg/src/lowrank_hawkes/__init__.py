"""
저랭크 다변량 Hawkes 과정 도구

이벤트 유형 임베딩 (P) 과 그룹 간 지수 커널 계수 (α) 를 교대 최적화로 학습하는 CLI 도구 및 API
"""

__version__ = "0.1.0"
