"""Tests for gfm_gfl_duality."""
