# Empty file