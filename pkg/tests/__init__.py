# Module
