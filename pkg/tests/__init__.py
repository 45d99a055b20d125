# Tests package for cogplay
