"""
Service layer for the maxent-hmm command line
"""

from .model_service import ModelService, write_report_lines

__all__ = ['ModelService', 'write_report_lines']
