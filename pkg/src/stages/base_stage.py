import logging
import time
import uuid
from abc import ABC, abstractmethod
from datetime import datetime
from typing import Any, Dict, Optional

from ..utils.errors import InvalidArgumentError, SteeringError

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 2
EXIT_COMPUTATION = 1


class BaseStage(ABC):
    """Base class for every pipeline stage"""

    def __init__(self,
                 stage_id: str = None,
                 stage_type: str = "generic",
                 config: Optional[Dict[str, Any]] = None):

        self.stage_id = stage_id or f"{stage_type}_{uuid.uuid4().hex[:8]}"
        self.stage_type = stage_type
        self.config = config or {}

        self.status = "ready"  # ready, running, degraded, failed
        self.error_count = 0
        self.start_time = time.time()
        self.last_active = time.time()

        self.metrics = {
            "total_requests": 0,
            "successful_requests": 0,
            "average_response_time": 0.0,
            "total_errors": 0,
        }
        self.error_history = []

        logger.debug("🧩 Stage created: %s (%s)", self.stage_id, self.stage_type)

    @abstractmethod
    async def process(self, task: Dict[str, Any]) -> Dict[str, Any]:
        """Run one operation; implemented by concrete stages"""

    async def execute(self, task: Dict[str, Any]) -> Dict[str, Any]:
        """Run `process` with timing, metrics and error capture"""
        start_time = time.time()
        self.last_active = start_time
        self.metrics["total_requests"] += 1
        self.status = "running"
        operation = task.get("operation", "?")

        try:
            result = await self.process(task)
            self.metrics["successful_requests"] += 1

            response_time = time.time() - start_time
            current_avg = self.metrics["average_response_time"]
            total_success = self.metrics["successful_requests"]
            self.metrics["average_response_time"] = (
                (current_avg * (total_success - 1) + response_time) / total_success
            )
            self.status = "ready" if self.error_count == 0 else "degraded"
            logger.info("✅ %s.%s finished in %.3fs", self.stage_id, operation, response_time)

            return {
                "success": True,
                "result": result,
                "stage_id": self.stage_id,
                "response_time": response_time,
                "timestamp": datetime.now().isoformat(),
            }

        except Exception as e:
            self.error_count += 1
            self.metrics["total_errors"] += 1
            if isinstance(e, SteeringError):
                code = e.code
            else:
                code = "internal"
                logger.exception("💥 Unexpected failure in %s.%s", self.stage_id, operation)
            exit_code = EXIT_VALIDATION if isinstance(e, InvalidArgumentError) else EXIT_COMPUTATION

            self.error_history.append({
                "error": str(e),
                "code": code,
                "operation": operation,
                "timestamp": datetime.now().isoformat(),
            })
            self.status = "failed" if self.error_count > 3 else "degraded"
            logger.warning("❌ %s.%s failed: %s", self.stage_id, operation, e)

            return {
                "success": False,
                "error": str(e),
                "error_code": code,
                "error_type": type(e).__name__,
                "details": getattr(e, "details", {}),
                "exit_code": exit_code,
                "stage_id": self.stage_id,
                "error_count": self.error_count,
                "status": self.status,
                "timestamp": datetime.now().isoformat(),
            }

    def get_metrics(self) -> Dict[str, Any]:
        return {
            "stage_id": self.stage_id,
            "stage_type": self.stage_type,
            "status": self.status,
            "uptime_seconds": time.time() - self.start_time,
            "error_count": self.error_count,
            "metrics": self.metrics,
            "last_active": datetime.fromtimestamp(self.last_active).isoformat(),
        }
