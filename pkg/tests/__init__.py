# Test package for diffpaint
