"""
File operations for model, strategy and report documents.

This module provides safe file operations including:
- Reading JSON documents with line-aware parse errors
- Atomic writing through a temporary file in the target directory
- Canonical JSON serialization
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, TextIO, Union

from .errors import ParseError
from .logging_config import get_logger

logger = get_logger(__name__)


class FileHandler:
    """Handles file operations with proper error handling and logging."""

    @staticmethod
    def read_document(file_path: Path) -> Dict[str, Any]:
        """
        Read a JSON document from disk.

        Args:
            file_path: Path to the document

        Returns:
            Parsed top-level JSON object

        Raises:
            IOError: If the file cannot be read
            ParseError: If the content is not a JSON object

        Example:
            >>> raw = FileHandler.read_document(Path("models/twoact.json"))
            >>> raw["objective"]
            'cost'
        """
        if not file_path.exists():
            raise FileNotFoundError(f"File not found: {file_path}")

        try:
            text = file_path.read_text(encoding='utf-8')
        except (OSError, UnicodeDecodeError) as e:
            logger.error(f"Failed to read file {file_path}: {e}")
            raise IOError(f"Read operation failed: {e}")

        logger.debug(f"Read {len(text)} characters from {file_path}")
        return FileHandler.parse_document(text)

    @staticmethod
    def parse_document(text: str) -> Dict[str, Any]:
        """
        Parse document text into a JSON object.

        Args:
            text: Document content

        Returns:
            Parsed top-level JSON object

        Raises:
            ParseError: On malformed JSON or a non-object top level
        """
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"Malformed JSON: {e.msg}", line=e.lineno)

        if not isinstance(data, dict):
            raise ParseError("Top-level document must be a JSON object", line=1)
        return data

    @staticmethod
    def dumps(document: Dict[str, Any]) -> str:
        """Serialize a document in canonical form (2-space indent, trailing newline)."""
        return json.dumps(document, indent=2, ensure_ascii=False, allow_nan=False) + "\n"

    @staticmethod
    def safe_write(file_path: Path, content: str, encoding: str = 'utf-8') -> None:
        """
        Atomically write content to a file.

        Args:
            file_path: Path to write to
            content: Content to write
            encoding: File encoding to use

        Raises:
            IOError: If write operation fails

        Example:
            >>> FileHandler.safe_write(Path("solution.json"), report_text)
        """
        tmp_name = None
        try:
            file_path.parent.mkdir(parents=True, exist_ok=True)

            fd, tmp_name = tempfile.mkstemp(
                prefix=f".{file_path.name}.", suffix=".tmp", dir=str(file_path.parent)
            )
            with os.fdopen(fd, 'w', encoding=encoding, newline='\n') as f:
                f.write(content)
            os.replace(tmp_name, file_path)
            tmp_name = None

            logger.debug(f"Successfully wrote file: {file_path}")

        except OSError as e:
            logger.error(f"Failed to write file {file_path}: {e}")
            raise IOError(f"Write operation failed: {e}")
        finally:
            if tmp_name is not None and os.path.exists(tmp_name):
                os.unlink(tmp_name)

    @staticmethod
    def emit(document: Union[Dict[str, Any], str], output: Union[Path, None],
             stream: TextIO) -> None:
        """
        Write a document to a file when output is given, otherwise to stream.

        Args:
            document: Document dict or already serialized text
            output: Optional output path
            stream: Fallback stream (usually sys.stdout)
        """
        text = document if isinstance(document, str) else FileHandler.dumps(document)
        if output is not None:
            FileHandler.safe_write(output, text)
            logger.info(f"Report written to {output}")
        else:
            stream.write(text)
            stream.flush()
