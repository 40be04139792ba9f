"""Scanning-robust aesthetic QR codes: generator, scanner simulator and
perturbation benchmark."""
from .exceptions import (
    CapacityExceeded,
    DecodeError,
    DetectFailed,
    DimensionMismatch,
    FormatInfoUnreadable,
    ImageTooSmall,
    NoPaddingAvailable,
    QRError,
    UncorrectableBlock,
    VerificationFailed,
    VersionEstimateFailed,
    VersionUnsupported,
)
from .pipeline import AestheticQRGenerator, BeautifyConfig, BeautifyResult, beautify
from .qr_symbol import DecodeResult, ModuleMatrix, QrSpec, decode_matrix, encode_symbol, render_matrix
from .scanner import QRScanner, ScanReport, scan

__version__ = "0.1.0"

__all__ = [
    "AestheticQRGenerator", "BeautifyConfig", "BeautifyResult", "beautify",
    "QrSpec", "ModuleMatrix", "DecodeResult", "encode_symbol", "decode_matrix", "render_matrix",
    "QRScanner", "ScanReport", "scan",
    "QRError", "CapacityExceeded", "VersionUnsupported", "FormatInfoUnreadable",
    "UncorrectableBlock", "DecodeError", "NoPaddingAvailable", "ImageTooSmall", "DetectFailed",
    "VersionEstimateFailed", "DimensionMismatch", "VerificationFailed",
]
